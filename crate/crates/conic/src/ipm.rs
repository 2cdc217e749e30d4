//! Primal-dual path-following method on the homogeneous self-dual embedding,
//! with Nesterov–Todd scaling and Mehrotra predictor-corrector steps.
//!
//! The Newton system is reduced to the Schur complement
//! `M_ik = sum_j A_ij • (W_j A_kj W_j) + sum_s a_is (x_s / z_s) a_ks`,
//! which is dense and factored by Cholesky. Blocks are small, so every
//! per-block operation uses dense `nalgebra` kernels.

use nalgebra::{DMatrix, DVector};

use crate::matrix::{max_step_psd, symmetrize};
use crate::standard::StandardForm;
use crate::{Residuals, SolveStatus, SolverOptions};

const STEP_FRACTION: f64 = 0.98;
const INFEASIBILITY_TOL: f64 = 1e-9;
const REFINE_STEPS: usize = 4;
/// A stalled run whose best iterate is within this factor of the tolerances
/// is still reported as optimal.
const NEAR_OPTIMAL_FACTOR: f64 = 100.0;

pub(crate) struct IpmPoint {
    pub x: Vec<DMatrix<f64>>,
    pub xs: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub zs: DVector<f64>,
}

/// Iterate of the homogeneous self-dual embedding.
struct Embedded {
    pt: IpmPoint,
    tau: f64,
    kappa: f64,
}

impl Embedded {
    fn normalized(&self) -> IpmPoint {
        let t = self.tau;
        IpmPoint {
            x: self.pt.x.iter().map(|m| m / t).collect(),
            xs: &self.pt.xs / t,
            y: &self.pt.y / t,
            z: self.pt.z.iter().map(|m| m / t).collect(),
            zs: &self.pt.zs / t,
        }
    }
}

fn inner(c: &[DMatrix<f64>], cs: &DVector<f64>, x: &[DMatrix<f64>], xs: &DVector<f64>) -> f64 {
    c.iter().zip(x).map(|(a, b)| crate::frobenius(a, b)).sum::<f64>() + cs.dot(xs)
}

pub(crate) struct IpmOutcome {
    pub point: IpmPoint,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// NT scaling of one block: `W = G G^T` with `G^{-1} X G^{-T} = G^T Z G = diag(λ)`.
struct BlockScaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
    chol_x: DMatrix<f64>,
    chol_z: DMatrix<f64>,
}

fn block_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &lx).svd(true, true);
    let v = svd.v_t.as_ref()?.transpose();
    let d = &svd.singular_values;
    if d.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let dm_half = DMatrix::from_diagonal(&d.map(|s| 1.0 / s.sqrt()));
    let dp_half = DMatrix::from_diagonal(&d.map(f64::sqrt));
    let lx_inv = lx.clone().solve_lower_triangular(&DMatrix::identity(n, n))?;
    let g = &lx * &v * dm_half;
    let ginv = dp_half * v.transpose() * lx_inv;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(BlockScaling { g, ginv, w, lambda: d.clone(), chol_x: lx, chol_z: lz })
}

struct Scaling {
    blocks: Vec<BlockScaling>,
    /// `x_s / z_s`.
    ws: DVector<f64>,
    zs: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxs: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzs: DVector<f64>,
}

struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    m: DMatrix<f64>,
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut sol = self.chol.solve(rhs);
        // refinement against the unregularized matrix
        let scale = rhs.amax().max(f64::MIN_POSITIVE);
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let r = rhs - &self.m * &sol;
            let rn = r.amax();
            if rn <= 1e-15 * scale || rn >= 0.5 * last {
                break;
            }
            last = rn;
            sol += self.chol.solve(&r);
        }
        sol
    }
}

pub(crate) fn solve(sf: &StandardForm, opts: &SolverOptions) -> IpmOutcome {
    Solver { sf, opts }.run()
}

struct Solver<'a> {
    sf: &'a StandardForm,
    opts: &'a SolverOptions,
}

impl Solver<'_> {
    fn nu(&self) -> f64 {
        (self.sf.block_dims.iter().sum::<usize>() + self.sf.n_scalars) as f64
    }

    fn initial_point(&self) -> Embedded {
        let sf = self.sf;
        let x: Vec<DMatrix<f64>> = sf.block_dims.iter().map(|&n| DMatrix::identity(n, n)).collect();
        Embedded {
            pt: IpmPoint {
                z: x.clone(),
                x,
                xs: DVector::from_element(sf.n_scalars, 1.0),
                y: DVector::zeros(sf.m()),
                zs: DVector::from_element(sf.n_scalars, 1.0),
            },
            tau: 1.0,
            kappa: 1.0,
        }
    }

    fn run(&self) -> IpmOutcome {
        let sf = self.sf;
        let nu = self.nu() + 1.0;
        let mut st = self.initial_point();
        let bnorm = sf.b.norm();
        let cnorm = (sf.c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>() + sf.c_scalars.norm_squared()).sqrt();
        let nblk = sf.block_dims.len();
        let zero_r: Vec<DMatrix<f64>> = sf.block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let zero_rs = DVector::zeros(sf.n_scalars);
        let mut best: Option<(f64, IpmPoint, Residuals, usize)> = None;
        let mut stalled = 0usize;

        for iter in 0..=self.opts.max_iter {
            let IpmPoint { x, xs, y, z, zs } = &st.pt;
            let (tau, kappa) = (st.tau, st.kappa);
            let ax = sf.apply(x, xs);
            let (aty, atys) = sf.adjoint(y);
            // homogeneous residuals
            let rp = &sf.b * tau - &ax;
            let rd: Vec<DMatrix<f64>> = (0..nblk)
                .map(|j| {
                    let mut r = &sf.c_blocks[j] * tau - &aty[j] - &z[j];
                    symmetrize(&mut r);
                    r
                })
                .collect();
            let rds = &sf.c_scalars * tau - &atys - zs;
            let cx = (0..nblk).map(|j| crate::frobenius(&sf.c_blocks[j], &x[j])).sum::<f64>() + sf.c_scalars.dot(xs);
            let by = sf.b.dot(y);
            let rg = kappa + cx - by;
            let compl = (0..nblk).map(|j| crate::frobenius(&x[j], &z[j])).sum::<f64>() + xs.dot(zs);
            let mu = (compl + tau * kappa) / nu;

            let rd_norm = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rds.norm_squared()).sqrt();
            let (pobj, dobj) = (cx / tau, by / tau);
            let denom = 1.0 + pobj.abs() + dobj.abs();
            let residuals = Residuals {
                primal: rp.norm() / tau / (1.0 + bnorm),
                dual: rd_norm / tau / (1.0 + cnorm),
                gap: (compl / (tau * tau)).max(0.0) / denom,
            };
            let obj_gap = (pobj - dobj).abs() / denom;
            if self.opts.verbose {
                eprintln!(
                    "ipm {iter:3} pobj {pobj:+.10e} dobj {dobj:+.10e} pinf {:.2e} dinf {:.2e} gap {:.2e} tau {tau:.2e} kappa {kappa:.2e} mu {mu:.2e}",
                    residuals.primal, residuals.dual, residuals.gap
                );
            }
            if residuals.primal <= self.opts.feas_tol
                && residuals.dual <= self.opts.feas_tol
                && residuals.gap <= self.opts.gap_tol
                && obj_gap <= self.opts.gap_tol
            {
                return IpmOutcome { point: st.normalized(), status: SolveStatus::Optimal, residuals, iterations: iter };
            }
            let merit = residuals.primal.max(residuals.dual).max(residuals.gap).max(obj_gap);
            if best.as_ref().map_or(true, |b| merit < b.0) {
                best = Some((merit, st.normalized(), residuals, iter));
            }
            // certificates from the embedding: a dual ray proves primal
            // infeasibility, a primal ray proves unboundedness
            if by > 0.0 {
                let ray = (aty.iter().zip(z.iter()).map(|(a, zj)| (a + zj).norm_squared()).sum::<f64>() + (&atys + zs).norm_squared()).sqrt();
                if ray / by < INFEASIBILITY_TOL * (1.0 + cnorm) {
                    return IpmOutcome { point: st.normalized(), status: SolveStatus::Infeasible, residuals, iterations: iter };
                }
            }
            if cx < 0.0 && ax.norm() / -cx < INFEASIBILITY_TOL * (1.0 + bnorm) {
                return IpmOutcome { point: st.normalized(), status: SolveStatus::Unbounded, residuals, iterations: iter };
            }
            if iter == self.opts.max_iter {
                break;
            }

            let Some(scaling) = self.scaling(&st.pt) else { break };
            let Some(factor) = self.factor(&scaling) else { break };

            // direction of the `tau` column: A d = b, A^T dy + dz = c, dX + W dZ W = 0
            let col = self.direction(&scaling, &factor, &sf.b, &sf.c_blocks, &sf.c_scalars, &zero_r, &zero_rs);
            let col_gap = sf.b.dot(&col.dy) - inner(&sf.c_blocks, &sf.c_scalars, &col.dx, &col.dxs);

            let solve = |eta: f64, r: &[DMatrix<f64>], rs: &DVector<f64>, rtau: f64| {
                let rp_e = &rp * eta;
                let rd_e: Vec<DMatrix<f64>> = rd.iter().map(|m| m * eta).collect();
                let rds_e = &rds * eta;
                let mut d = self.direction(&scaling, &factor, &rp_e, &rd_e, &rds_e, r, rs);
                let d_gap = sf.b.dot(&d.dy) - inner(&sf.c_blocks, &sf.c_scalars, &d.dx, &d.dxs);
                let dtau = (rtau + tau * eta * rg + tau * -d_gap) / (kappa + tau * col_gap);
                for j in 0..nblk {
                    d.dx[j] += &col.dx[j] * dtau;
                    d.dz[j] += &col.dz[j] * dtau;
                }
                d.dxs += &col.dxs * dtau;
                d.dzs += &col.dzs * dtau;
                d.dy += &col.dy * dtau;
                let dkappa = (rtau - kappa * dtau) / tau;
                (d, dtau, dkappa)
            };

            // predictor
            let r_aff: Vec<DMatrix<f64>> =
                scaling.blocks.iter().map(|s| DMatrix::from_diagonal(&s.lambda.map(|l| -l * l))).collect();
            let rs_aff = -xs.component_mul(zs);
            let (aff, dtau_a, dkappa_a) = solve(1.0, &r_aff, &rs_aff, -tau * kappa);
            let a_aff = self.step_length(&st, &scaling, &aff, dtau_a, dkappa_a).min(1.0);
            let mut compl_aff = 0.0;
            for j in 0..nblk {
                compl_aff += crate::frobenius(&(&x[j] + &aff.dx[j] * a_aff), &(&z[j] + &aff.dz[j] * a_aff));
            }
            compl_aff += (xs + &aff.dxs * a_aff).dot(&(zs + &aff.dzs * a_aff));
            compl_aff += (tau + a_aff * dtau_a) * (kappa + a_aff * dkappa_a);
            let sigma = ((compl_aff / nu).max(0.0) / mu).powi(3).clamp(0.0, 1.0);

            // combined corrector
            let r_cor: Vec<DMatrix<f64>> = scaling
                .blocks
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let xt = &s.ginv * &aff.dx[j] * s.ginv.transpose();
                    let zt = s.g.transpose() * &aff.dz[j] * &s.g;
                    let xz = &xt * &zt;
                    let mut r = -(&xz + xz.transpose()) * 0.5;
                    for a in 0..r.nrows() {
                        r[(a, a)] += sigma * mu - s.lambda[a] * s.lambda[a];
                    }
                    r
                })
                .collect();
            let rs_cor = DVector::from_iterator(
                sf.n_scalars,
                (0..sf.n_scalars).map(|k| sigma * mu - xs[k] * zs[k] - aff.dxs[k] * aff.dzs[k]),
            );
            let rtau = sigma * mu - tau * kappa - dtau_a * dkappa_a;
            let (dir, dtau, dkappa) = solve(1.0 - sigma, &r_cor, &rs_cor, rtau);
            let alpha = (STEP_FRACTION * self.step_length(&st, &scaling, &dir, dtau, dkappa)).min(1.0);
            if alpha < 1e-8 {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            } else {
                stalled = 0;
            }

            let pt = &mut st.pt;
            for j in 0..nblk {
                pt.x[j] += &dir.dx[j] * alpha;
                pt.z[j] += &dir.dz[j] * alpha;
                symmetrize(&mut pt.x[j]);
                symmetrize(&mut pt.z[j]);
            }
            pt.xs += &dir.dxs * alpha;
            pt.zs += &dir.dzs * alpha;
            pt.y += &dir.dy * alpha;
            st.tau += dtau * alpha;
            st.kappa += dkappa * alpha;
        }
        // out of iterations or numerically stuck: report the best iterate,
        // accepting it when it is close to the requested accuracy
        let (merit, point, res, it) = best.expect("at least one iterate is evaluated");
        let status = if merit <= NEAR_OPTIMAL_FACTOR * self.opts.feas_tol.max(self.opts.gap_tol) {
            SolveStatus::Optimal
        } else if self.opts.max_iter == 0 || it + 1 >= self.opts.max_iter {
            SolveStatus::MaxIter
        } else {
            SolveStatus::NumericalFailure
        };
        IpmOutcome { point, status, residuals: res, iterations: it }
    }

    fn step_length(&self, st: &Embedded, scaling: &Scaling, d: &Direction, dtau: f64, dkappa: f64) -> f64 {
        let (ap, ad) = self.step_lengths(&st.pt, scaling, d);
        let mut a = ap.min(ad);
        if dtau < 0.0 {
            a = a.min(-st.tau / dtau);
        }
        if dkappa < 0.0 {
            a = a.min(-st.kappa / dkappa);
        }
        a
    }

    fn scaling(&self, pt: &IpmPoint) -> Option<Scaling> {
        let blocks = pt
            .x
            .iter()
            .zip(&pt.z)
            .map(|(x, z)| block_scaling(x, z))
            .collect::<Option<Vec<_>>>()?;
        if pt.xs.iter().chain(pt.zs.iter()).any(|v| !(*v > 0.0)) {
            return None;
        }
        Some(Scaling { blocks, ws: pt.xs.component_div(&pt.zs), zs: pt.zs.clone() })
    }

    fn factor(&self, scaling: &Scaling) -> Option<Factor> {
        let sf = self.sf;
        let m = sf.m();
        let mut mat = DMatrix::<f64>::zeros(m, m);
        for (j, rows) in sf.block_rows.iter().enumerate() {
            let w = &scaling.blocks[j].w;
            let waw: Vec<DMatrix<f64>> =
                rows.iter().map(|&(i, k)| w * &sf.rows[i].blocks[k].1 * w).collect();
            for (p, &(i, ki)) in rows.iter().enumerate() {
                let ai = &sf.rows[i].blocks[ki].1;
                for (q, &(k, _)) in rows.iter().enumerate().skip(p) {
                    let v = crate::frobenius(ai, &waw[q]);
                    mat[(i, k)] += v;
                    if i != k {
                        mat[(k, i)] += v;
                    }
                }
            }
        }
        for (s, rows) in sf.scalar_rows.iter().enumerate() {
            let w = scaling.ws[s];
            for (p, &(i, a)) in rows.iter().enumerate() {
                for &(k, b) in rows.iter().skip(p) {
                    let v = a * b * w;
                    mat[(i, k)] += v;
                    if i != k {
                        mat[(k, i)] += v;
                    }
                }
            }
        }
        let dmax = (0..m).map(|i| mat[(i, i)]).fold(1.0f64, f64::max);
        if let Some(chol) = mat.clone().cholesky() {
            return Some(Factor { chol, m: mat });
        }
        let mut delta = self.opts.regularization * dmax;
        for _ in 0..6 {
            let mut reg = mat.clone();
            for i in 0..m {
                reg[(i, i)] += delta;
            }
            if let Some(chol) = reg.cholesky() {
                return Some(Factor { chol, m: mat });
            }
            delta = (delta * 100.0).max(1e-14 * dmax);
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        scaling: &Scaling,
        factor: &Factor,
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        rds: &DVector<f64>,
        r: &[DMatrix<f64>],
        rs: &DVector<f64>,
    ) -> Direction {
        let sf = self.sf;
        // Rc = G (R ⊘ Λ) G^T, so that dX + W dZ W = Rc
        let rc: Vec<DMatrix<f64>> = scaling
            .blocks
            .iter()
            .zip(r)
            .map(|(s, rj)| {
                let n = rj.nrows();
                let u = DMatrix::from_fn(n, n, |a, b| 2.0 * rj[(a, b)] / (s.lambda[a] + s.lambda[b]));
                &s.g * u * s.g.transpose()
            })
            .collect();
        let rcs = rs.component_div(&scaling.zs);
        let t: Vec<DMatrix<f64>> = rc
            .iter()
            .zip(rd)
            .zip(&scaling.blocks)
            .map(|((c, d), s)| c - &s.w * d * &s.w)
            .collect();
        let ts = &rcs - scaling.ws.component_mul(rds);
        let rhs = rp - sf.apply(&t, &ts);
        let mut dy = factor.solve(&rhs);
        // refine against the Schur operator itself rather than its assembled
        // matrix, whose rounding dominates once the scalings are extreme
        let apply_schur = |dy: &DVector<f64>| {
            let (a, s) = sf.adjoint(dy);
            let w: Vec<DMatrix<f64>> = a.iter().zip(&scaling.blocks).map(|(m, b)| &b.w * m * &b.w).collect();
            sf.apply(&w, &s.component_mul(&scaling.ws))
        };
        let mut err = &rhs - apply_schur(&dy);
        let mut err_norm = err.amax();
        for _ in 0..REFINE_STEPS {
            if err_norm <= 1e-15 * rhs.amax() {
                break;
            }
            let cand = &dy + factor.solve(&err);
            let cand_err = &rhs - apply_schur(&cand);
            let n = cand_err.amax();
            if n >= 0.5 * err_norm {
                break;
            }
            dy = cand;
            err = cand_err;
            err_norm = n;
        }
        let (atdy, atdys) = sf.adjoint(&dy);
        let dz: Vec<DMatrix<f64>> = rd
            .iter()
            .zip(&atdy)
            .map(|(d, a)| {
                let mut v = d - a;
                symmetrize(&mut v);
                v
            })
            .collect();
        let dzs = rds - atdys;
        let dx: Vec<DMatrix<f64>> = rc
            .iter()
            .zip(&dz)
            .zip(&scaling.blocks)
            .map(|((c, z), s)| {
                let mut v = c - &s.w * z * &s.w;
                symmetrize(&mut v);
                v
            })
            .collect();
        let dxs = rcs - scaling.ws.component_mul(&dzs);
        Direction { dx, dxs, dy, dz, dzs }
    }

    fn step_lengths(&self, pt: &IpmPoint, scaling: &Scaling, d: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for (j, s) in scaling.blocks.iter().enumerate() {
            ap = ap.min(max_step_psd(&s.chol_x, &d.dx[j]));
            ad = ad.min(max_step_psd(&s.chol_z, &d.dz[j]));
        }
        for k in 0..pt.xs.len() {
            if d.dxs[k] < 0.0 {
                ap = ap.min(-pt.xs[k] / d.dxs[k]);
            }
            if d.dzs[k] < 0.0 {
                ad = ad.min(-pt.zs[k] / d.dzs[k]);
            }
        }
        (ap, ad)
    }
}
