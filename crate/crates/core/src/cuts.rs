//! McCormick / RLT rows over the lifted hydro blocks.
//!
//! Products of nonnegative box differences such as `(v̄ − v)(q − q̲) ≥ 0`
//! are linear in the lifted entries `(v, q, vq, v²)`, so each one becomes a
//! linear row over the 3×3 block of a plant and period.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use htc_conic::{ConstraintRow, RowId, Sense};
use nalgebra::DMatrix;
use rand::Rng;

use crate::case::CaseStudy;
use crate::model::HydroPlant;
use crate::shor::{lift_hydro, LiftedLayout, Relaxation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutOrigin {
    /// `vq ≤ q̲v + v̄q − v̄q̲`.
    VqUpperA,
    /// `vq ≤ q̄v + v̲q − v̲q̄`.
    VqUpperB,
    /// `v² ≤ (v̄ + v̲)v − v̄v̲`.
    V2Upper,
    /// Under-estimators of `vq`, off by default.
    GenericMcCormick,
}

impl fmt::Display for CutOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutOrigin::VqUpperA => "vq_upper_A",
            CutOrigin::VqUpperB => "vq_upper_B",
            CutOrigin::V2Upper => "v2_upper",
            CutOrigin::GenericMcCormick => "generic_mccormick",
        })
    }
}

/// `xy·w + x·a + y·b ≥ rhs` over a point `(x, y)` and its product `w = xy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub coef_xy: f64,
    pub coef_x: f64,
    pub coef_y: f64,
    pub rhs: f64,
}

impl Envelope {
    pub fn evaluate(&self, x: f64, y: f64, xy: f64) -> f64 {
        self.coef_xy * xy + self.coef_x * x + self.coef_y * y
    }

    pub fn holds(&self, x: f64, y: f64, xy: f64, tol: f64) -> bool {
        self.evaluate(x, y, xy) >= self.rhs - tol
    }
}

/// The four McCormick rows for `xy` on `[x̲, x̄] × [y̲, ȳ]`: the two
/// over-estimators followed by the two under-estimators.
pub fn generic_mccormick(x_bounds: (f64, f64), y_bounds: (f64, f64)) -> [Envelope; 4] {
    let ((xl, xu), (yl, yu)) = (x_bounds, y_bounds);
    [
        // (x̄ − x)(y − y̲) ≥ 0
        Envelope { coef_xy: -1.0, coef_x: yl, coef_y: xu, rhs: xu * yl },
        // (x − x̲)(ȳ − y) ≥ 0
        Envelope { coef_xy: -1.0, coef_x: yu, coef_y: xl, rhs: xl * yu },
        // (x − x̲)(y − y̲) ≥ 0
        Envelope { coef_xy: 1.0, coef_x: -yl, coef_y: -xl, rhs: -xl * yl },
        // (x̄ − x)(ȳ − y) ≥ 0
        Envelope { coef_xy: 1.0, coef_x: -yu, coef_y: -xu, rhs: -xu * yu },
    ]
}

/// One cut row over the block of a plant and period: `matrix • X ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub origin: CutOrigin,
    pub period: usize,
    pub plant: usize,
    pub matrix: DMatrix<f64>,
    pub rhs: f64,
}

impl Cut {
    /// Value of `matrix • lift(v, q) − rhs`.
    pub fn slack_at(&self, v: f64, q: f64) -> f64 {
        htc_conic::frobenius(&self.matrix, &lift_hydro(v, q)) - self.rhs
    }
}

fn vq_cut(e: &Envelope, origin: CutOrigin, period: usize, plant: usize) -> Cut {
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 1)] = 0.5 * e.coef_xy;
    m[(1, 0)] = 0.5 * e.coef_xy;
    m[(0, 2)] = 0.5 * e.coef_x;
    m[(2, 0)] = 0.5 * e.coef_x;
    m[(1, 2)] = 0.5 * e.coef_y;
    m[(2, 1)] = 0.5 * e.coef_y;
    Cut { origin, period, plant, matrix: m, rhs: e.rhs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CutOptions {
    /// Also add the two under-estimators of `vq`.
    pub under_estimators: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutSet {
    pub cuts: Vec<Cut>,
}

impl CutSet {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn extend(&mut self, other: CutSet) {
        self.cuts.extend(other.cuts);
    }

    pub fn count(&self, origin: CutOrigin) -> usize {
        self.cuts.iter().filter(|c| c.origin == origin).count()
    }

    /// Adds every cut as a `≥` row on its block.
    ///
    /// A block whose storage is pinned at one of its bounds and that receives
    /// the square cut has `v² = v̄²` forced, so every feasible lifted matrix
    /// has the kernel vector `(1, 0, -v_pin)`: the block has no strictly
    /// feasible point. Such blocks are restricted to that face for the
    /// embedded solver, and rows that become multiples of the corner row
    /// there (the pin itself and the degenerate cuts) are marked implied.
    /// The feasible set is unchanged.
    pub fn apply(&self, case: &CaseStudy, rel: &mut Relaxation) {
        let mut rows_by_block: BTreeMap<(usize, usize), Vec<(RowId, &Cut)>> = BTreeMap::new();
        for c in &self.cuts {
            let block = rel.layout.hydro[c.period][c.plant];
            let label = format!("{}[{},{}]", c.origin, c.period, case.hydro[c.plant].id);
            let row = rel.problem.add_row(ConstraintRow::new(Sense::Ge, c.rhs).with_block(block, c.matrix.clone()).labeled(label));
            rows_by_block.entry((c.period, c.plant)).or_default().push((row, c));
        }
        for ((t, h), rows) in rows_by_block {
            let Some((pin_row, value)) = rel.layout.pinned.get(t).and_then(|r| r[h]) else {
                continue;
            };
            let plant = &case.hydro[h];
            let at_bound = [plant.v_min, plant.v_max]
                .iter()
                .any(|b| (value - b).abs() <= 1e-12 * plant.v_max.abs().max(1.0));
            if !at_bound || !rows.iter().any(|(_, c)| c.origin == CutOrigin::V2Upper) {
                continue;
            }
            let face = pinned_face(value, plant.q_max.abs().max(1.0));
            for (row, c) in &rows {
                if reduces_to_corner(&face, &c.matrix, c.rhs) {
                    rel.problem.mark_implied(*row);
                }
            }
            rel.problem.mark_implied(pin_row);
            rel.problem.set_block_face(rel.layout.hydro[t][h], face);
        }
    }

    /// Debug listing: origin, period, plant, nonzero upper-triangle entries, rhs.
    pub fn to_text(&self, case: &CaseStudy) -> String {
        let mut out = String::new();
        for c in &self.cuts {
            let _ = write!(out, "{} t={} {}", c.origin, c.period + 1, case.hydro[c.plant].id);
            for i in 0..3 {
                for j in i..3 {
                    if c.matrix[(i, j)] != 0.0 {
                        let _ = write!(out, " ({},{})={}", i + 1, j + 1, c.matrix[(i, j)]);
                    }
                }
            }
            let _ = writeln!(out, " >= {}", c.rhs);
        }
        out
    }
}

/// `T` with `[v, q, 1] = T [q / q_scale, 1]` at storage `v_pin`.
fn pinned_face(v_pin: f64, q_scale: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 2, &[0.0, v_pin, q_scale, 0.0, 0.0, 1.0])
}

/// True when `M • X ≥ rhs` restricted to `X = T W Tᵀ` reads `rhs · W₂₂ ≥ rhs`,
/// i.e. holds with equality on the corner row `W₂₂ = 1`.
fn reduces_to_corner(face: &DMatrix<f64>, m: &DMatrix<f64>, rhs: f64) -> bool {
    let w = face.transpose() * m * face;
    let scale = m.amax().max(rhs.abs()).max(1.0) * face.amax().powi(2);
    let tol = 1e-12 * scale;
    w[(0, 0)].abs() <= tol && w[(0, 1)].abs() <= tol && (w[(1, 1)] - rhs).abs() <= tol
}

/// The bilinear and square upper bounds for one plant and period. The
/// bilinear rows are only needed (and only emitted) when `ε_qv > 0`.
pub fn rlt_cuts_for_plant(plant: &HydroPlant, period: usize, index: usize, options: &CutOptions) -> CutSet {
    let mut cuts = Vec::new();
    let env = generic_mccormick((plant.v_min, plant.v_max), (plant.q_min, plant.q_max));
    if plant.production.eps_qv > 0.0 {
        cuts.push(vq_cut(&env[0], CutOrigin::VqUpperA, period, index));
        cuts.push(vq_cut(&env[1], CutOrigin::VqUpperB, period, index));
    }
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 0)] = -1.0;
    m[(0, 2)] = 0.5 * (plant.v_max + plant.v_min);
    m[(2, 0)] = m[(0, 2)];
    cuts.push(Cut { origin: CutOrigin::V2Upper, period, plant: index, matrix: m, rhs: plant.v_max * plant.v_min });
    if options.under_estimators {
        cuts.push(vq_cut(&env[2], CutOrigin::GenericMcCormick, period, index));
        cuts.push(vq_cut(&env[3], CutOrigin::GenericMcCormick, period, index));
    }
    CutSet { cuts }
}

/// Cuts for every plant and period of the layout.
pub fn rlt_cuts(case: &CaseStudy, layout: &LiftedLayout, options: &CutOptions) -> CutSet {
    let mut set = CutSet::default();
    for t in 0..layout.hydro.len() {
        for (h, plant) in case.hydro.iter().enumerate() {
            set.extend(rlt_cuts_for_plant(plant, t, h, options));
        }
    }
    set
}

/// True when the cut holds on the lift of `samples` uniformly drawn
/// box-feasible `(v, q)` of the plant.
pub fn validate_cut<R: Rng>(cut: &Cut, plant: &HydroPlant, samples: usize, rng: &mut R) -> bool {
    let draw = |rng: &mut R, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let scale = 1.0 + plant.v_max.abs().max(plant.q_max.abs()).powi(2);
    (0..samples).all(|_| {
        let v = draw(rng, plant.v_min, plant.v_max);
        let q = draw(rng, plant.q_min, plant.q_max);
        cut.slack_at(v, q) >= -1e-12 * scale
    })
}
