//! Problem instances: JSON ingestion, validation and derived variants.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{theta, HydroPlant, Period, ThermalPlant};

const PARANAIBA_JSON: &str = include_str!("../data/paranaiba.json");
const MINI_JSON: &str = include_str!("../data/mini.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub periods: Vec<Period>,
    /// Inflow (m³/s) per period, keyed by hydro plant id.
    pub inflows: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudy {
    pub hydro: Vec<HydroPlant>,
    pub thermal: Vec<ThermalPlant>,
    pub horizon: Horizon,
}

/// One violated invariant; `field` locates it, e.g. `hydro[GH3].v_min`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse case file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid case: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationIssue>),
}

impl CaseStudy {
    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let case: CaseStudy = serde_json::from_str(text)?;
        case.validate().map_err(CaseError::Invalid)?;
        Ok(case)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CaseError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    /// Five-plant cascade with one thermal plant over twelve months.
    pub fn paranaiba() -> Self {
        Self::from_json(PARANAIBA_JSON).expect("bundled case is valid")
    }

    /// One storage plant and one thermal plant over two periods.
    pub fn mini() -> Self {
        Self::from_json(MINI_JSON).expect("bundled case is valid")
    }

    pub fn num_periods(&self) -> usize {
        self.horizon.periods.len()
    }

    pub fn hydro_index(&self, id: &str) -> Option<usize> {
        self.hydro.iter().position(|h| h.id == id)
    }

    /// Indices of the plants immediately upstream of plant `h`.
    pub fn upstream_of(&self, h: usize) -> Vec<usize> {
        self.hydro[h]
            .upstream
            .iter()
            .map(|id| self.hydro_index(id).expect("validated reference"))
            .collect()
    }

    /// Indices of the plants immediately downstream of plant `h`.
    pub fn downstream_of(&self, h: usize) -> Vec<usize> {
        let id = &self.hydro[h].id;
        (0..self.hydro.len()).filter(|&k| self.hydro[k].upstream.iter().any(|u| u == id)).collect()
    }

    pub fn inflow(&self, t: usize, h: usize) -> f64 {
        self.horizon.inflows[&self.hydro[h].id][t]
    }

    pub fn load_at(&self, t: usize) -> f64 {
        self.horizon.periods[t].load
    }

    pub fn theta_at(&self, t: usize) -> f64 {
        theta(self.horizon.periods[t].days)
    }

    /// Every invariant violation, in a stable order.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        let mut push = |field: String, message: &str| {
            issues.push(ValidationIssue { field, message: message.to_string() })
        };
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());

        if self.hydro.is_empty() && self.thermal.is_empty() {
            push("hydro".into(), "case has no plants");
        }
        if self.horizon.periods.is_empty() {
            push("horizon.periods".into(), "horizon has no periods");
        }
        let mut seen = HashSet::new();
        for id in self.hydro.iter().map(|h| &h.id).chain(self.thermal.iter().map(|t| &t.id)) {
            if !seen.insert(id.as_str()) {
                push(format!("plant[{id}]"), "duplicate plant id");
            }
        }

        for h in &self.hydro {
            let f = |name: &str| format!("hydro[{}].{name}", h.id);
            let p = &h.production;
            if !finite(&[h.v_min, h.v_max, h.q_min, h.q_max, h.v_initial, h.v_final])
                || !finite(&p.coefficients())
            {
                push(f("*"), "non-finite value");
                continue;
            }
            if h.v_min > h.v_max {
                push(f("v_min"), "storage lower bound exceeds upper bound");
            }
            if h.q_min > h.q_max {
                push(f("q_min"), "discharge lower bound exceeds upper bound");
            }
            if h.v_min < 0.0 || h.q_min < 0.0 {
                push(f("v_min"), "storage and discharge bounds must be nonnegative");
            }
            if h.v_initial < h.v_min || h.v_initial > h.v_max {
                push(f("v_initial"), "initial storage outside the storage bounds");
            }
            if h.v_final < h.v_min || h.v_final > h.v_max {
                push(f("v_final"), "final storage outside the storage bounds");
            }
            if !(p.eps_q > 0.0) {
                push(f("production.eps_q"), "linear discharge coefficient must be positive");
            }
            if p.eps_qq > 0.0 {
                push(f("production.eps_qq"), "quadratic discharge coefficient must not be positive");
            }
            if p.eps_qv < 0.0 {
                push(f("production.eps_qv"), "storage-discharge coefficient must be nonnegative");
            }
            for u in &h.upstream {
                if self.hydro_index(u).is_none() {
                    push(f("upstream"), &format!("unknown upstream plant `{u}`"));
                } else if u == &h.id {
                    push(f("upstream"), "plant lists itself as upstream");
                }
            }
            match self.horizon.inflows.get(&h.id) {
                None => push(format!("horizon.inflows[{}]", h.id), "missing inflow series"),
                Some(series) => {
                    if series.len() != self.horizon.periods.len() {
                        push(
                            format!("horizon.inflows[{}]", h.id),
                            &format!(
                                "has {} entries, expected one per period ({})",
                                series.len(),
                                self.horizon.periods.len()
                            ),
                        );
                    }
                    if series.iter().any(|e| !e.is_finite() || *e < 0.0) {
                        push(format!("horizon.inflows[{}]", h.id), "inflows must be finite and nonnegative");
                    }
                }
            }
        }
        for id in self.horizon.inflows.keys() {
            if self.hydro_index(id).is_none() {
                push(format!("horizon.inflows[{id}]"), "inflow series for unknown plant");
            }
        }
        for t in &self.thermal {
            let f = |name: &str| format!("thermal[{}].{name}", t.id);
            if !finite(&[t.p_min, t.p_max, t.c0, t.c1, t.c2]) {
                push(f("*"), "non-finite value");
                continue;
            }
            if t.p_min > t.p_max {
                push(f("p_min"), "power lower bound exceeds upper bound");
            }
            if t.c2 < 0.0 {
                push(f("c2"), "quadratic cost coefficient must be nonnegative");
            }
        }
        for (k, p) in self.horizon.periods.iter().enumerate() {
            if !(p.days >= 1.0) || !p.days.is_finite() {
                push(format!("horizon.periods[{k}].days"), "period must span at least one day");
            }
            if !(p.load >= 0.0) || !p.load.is_finite() {
                push(format!("horizon.periods[{k}].load"), "load must be finite and nonnegative");
            }
        }
        if issues.is_empty() {
            if let Some(cycle) = self.find_cycle() {
                issues.push(ValidationIssue {
                    field: "hydro.upstream".into(),
                    message: format!("cyclic topology: {}", cycle.join(" -> ")),
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// A cycle in the upstream relation, as a closed list of plant ids.
    fn find_cycle(&self) -> Option<Vec<String>> {
        // 0 = unvisited, 1 = on the current path, 2 = done
        let n = self.hydro.len();
        let mut state = vec![0u8; n];
        let mut path = Vec::new();
        fn visit(case: &CaseStudy, h: usize, state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<String>> {
            state[h] = 1;
            path.push(h);
            for u in case.hydro[h].upstream.iter().filter_map(|id| case.hydro_index(id)) {
                if state[u] == 1 {
                    let start = path.iter().position(|&p| p == u).expect("on path");
                    let mut cycle: Vec<String> = path[start..].iter().map(|&p| case.hydro[p].id.clone()).collect();
                    cycle.push(case.hydro[u].id.clone());
                    return Some(cycle);
                }
                if state[u] == 0 {
                    if let Some(c) = visit(case, u, state, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            state[h] = 2;
            None
        }
        (0..n).find_map(|h| if state[h] == 0 { visit(self, h, &mut state, &mut path) } else { None })
    }

    /// Same case with every storage-discharge coefficient set to zero, which
    /// makes every production function concave.
    pub fn with_concave_production(&self) -> Self {
        let mut c = self.clone();
        for h in &mut c.hydro {
            h.production.eps_qv = 0.0;
        }
        c
    }

    /// Sub-case with the listed hydro plants and the first `periods` periods.
    /// Upstream references to dropped plants are removed.
    pub fn reduced(&self, plants: &[&str], periods: usize) -> Self {
        let hydro: Vec<HydroPlant> = self
            .hydro
            .iter()
            .filter(|h| plants.contains(&h.id.as_str()))
            .map(|h| {
                let mut h = h.clone();
                h.upstream.retain(|u| plants.contains(&u.as_str()));
                h
            })
            .collect();
        let inflows = hydro
            .iter()
            .map(|h| (h.id.clone(), self.horizon.inflows[&h.id][..periods].to_vec()))
            .collect();
        Self {
            hydro,
            thermal: self.thermal.clone(),
            horizon: Horizon { periods: self.horizon.periods[..periods].to_vec(), inflows },
        }
    }
}
