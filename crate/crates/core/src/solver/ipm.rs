//! Primal-dual interior point method with a filter line search.
//!
//! Inequality rows get slack variables, so the iterate is `w = (x, s)` with
//! equality constraints `c(w) = 0` and simple bounds on `w`. Each iteration
//! solves the symmetric indefinite KKT system with a sparse LDLᵀ
//! factorization, correcting the inertia by diagonal regularization. Steps
//! are accepted by a filter on (constraint violation, barrier objective)
//! with second-order corrections, and a Gauss-Newton feasibility
//! restoration phase takes over when the line search fails.

use std::time::Instant;

use super::ldl::{symmetric_matvec, Inertia, LdlError, SparseLdl};
use super::{Nlp, NlpSolution, SolveReport, SolveStatus, SolverError, SolverOptions};

const INFINITE_BOUND: f64 = 1e19;
const KAPPA_EPS: f64 = 10.0;
const BOUND_PUSH: f64 = 1e-2;
const STATIC_REG: f64 = 1e-9;
/// Largest factor by which a trial point may increase the infeasibility.
const THETA_GROWTH: f64 = 100.0;
const S_PHI: f64 = 2.3;
const S_THETA: f64 = 1.1;
const ETA_PHI: f64 = 1e-8;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const MAX_SOC: usize = 4;
const KAPPA_SOC: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const S_MAX: f64 = 100.0;
const MAX_MULTIPLIER_INIT: f64 = 1e3;
const POLISH_TARGET: f64 = 1e-14;

/// How an iteration moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Sufficient decrease of the barrier objective.
    Objective,
    /// Sufficient decrease of the constraint violation or the barrier
    /// objective, accepted by the filter.
    Feasibility,
    /// Accepted after a second-order correction.
    SecondOrder,
    /// Gauss-Newton feasibility restoration.
    Restoration,
}

/// One line of the iteration log. `theta` and `barrier` are measured at the
/// start of the iteration, the `_trial` values at the accepted point, both
/// under the same barrier parameter `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub mu: f64,
    /// Unscaled objective at the accepted point.
    pub objective: f64,
    pub theta: f64,
    pub barrier: f64,
    pub theta_trial: f64,
    pub barrier_trial: f64,
    pub alpha_pr: f64,
    pub alpha_du: f64,
    pub kind: StepKind,
    pub regularization: f64,
}

fn finite_lo(v: f64) -> f64 {
    if v <= -INFINITE_BOUND {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn finite_hi(v: f64) -> f64 {
    if v >= INFINITE_BOUND {
        f64::INFINITY
    } else {
        v
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The problem in scaled variables with slacks attached.
struct Scaled<'a, P: Nlp + ?Sized> {
    nlp: &'a P,
    n: usize,
    nw: usize,
    mk: usize,
    scale: Vec<f64>,
    obj_scale: f64,
    kept: Vec<usize>,
    /// Slack index in `w` of each kept row, if it is an inequality.
    slack: Vec<Option<usize>>,
    /// Right-hand side of each kept equality row.
    target: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// (original Jacobian entry, kept row, column) for kept rows.
    jac_kept: Vec<(usize, usize, usize)>,
    n_jac: usize,
    hess: Vec<(usize, usize)>,
    entries: Vec<(usize, usize)>,
}

impl<'a, P: Nlp + ?Sized> Scaled<'a, P> {
    fn new(nlp: &'a P) -> Scaled<'a, P> {
        let n = nlp.num_vars();
        let m = nlp.num_cons();
        let scale: Vec<f64> = nlp
            .var_scaling()
            .into_iter()
            .map(|s| if s.is_finite() && s > 0.0 { s } else { 1.0 })
            .collect();
        let (gl, gu) = nlp.con_bounds();
        let redundant = nlp.redundant_constraints();
        let kept: Vec<usize> = (0..m).filter(|r| !redundant.contains(r)).collect();
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        let (xl, xu) = nlp.var_bounds();
        for i in 0..n {
            let (mut l, mut u) = (finite_lo(xl[i]) / scale[i], finite_hi(xu[i]) / scale[i]);
            if u - l < 1e-12 * l.abs().max(1.0) {
                let r = 1e-8 * l.abs().max(1.0);
                l -= r;
                u += r;
            }
            lo.push(l);
            hi.push(u);
        }
        let mut slack = Vec::with_capacity(kept.len());
        let mut target = Vec::with_capacity(kept.len());
        let mut row_pos = vec![usize::MAX; m];
        for (k, &r) in kept.iter().enumerate() {
            row_pos[r] = k;
            if gl[r] == gu[r] {
                slack.push(None);
                target.push(gl[r]);
            } else {
                slack.push(Some(lo.len()));
                target.push(0.0);
                lo.push(finite_lo(gl[r]));
                hi.push(finite_hi(gu[r]));
            }
        }
        let nw = lo.len();
        let mk = kept.len();
        let jac_kept: Vec<(usize, usize, usize)> = nlp
            .jacobian_structure()
            .iter()
            .enumerate()
            .filter(|(_, &(r, _))| row_pos[r] != usize::MAX)
            .map(|(e, &(r, c))| (e, row_pos[r], c))
            .collect();
        let hess = nlp.hessian_structure().to_vec();
        let mut entries = hess.clone();
        entries.extend(jac_kept.iter().map(|&(_, k, c)| (nw + k, c)));
        for (k, s) in slack.iter().enumerate() {
            if let Some(j) = s {
                entries.push((nw + k, *j));
            }
        }
        Scaled {
            nlp,
            n,
            nw,
            mk,
            scale,
            obj_scale: 1.0,
            kept,
            slack,
            target,
            lo,
            hi,
            n_jac: nlp.jacobian_structure().len(),
            jac_kept,
            hess,
            entries,
        }
    }

    fn x_of(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| w[i] * self.scale[i]).collect()
    }

    fn objective(&self, w: &[f64]) -> f64 {
        self.obj_scale * self.nlp.objective(&self.x_of(w))
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.nlp.gradient(&self.x_of(w), &mut g);
        let mut out = vec![0.0; self.nw];
        for i in 0..self.n {
            out[i] = self.obj_scale * g[i] * self.scale[i];
        }
        out
    }

    /// Kept rows of `c(w)`, or `None` when a value is not finite.
    fn constraints(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.nlp.num_cons()];
        self.nlp.constraints(&self.x_of(w), &mut g);
        let c: Vec<f64> = self
            .kept
            .iter()
            .enumerate()
            .map(|(k, &r)| match self.slack[k] {
                Some(j) => g[r] - w[j],
                None => g[r] - self.target[k],
            })
            .collect();
        c.iter().all(|v| v.is_finite()).then_some(c)
    }

    /// Scaled Jacobian values of the kept rows, aligned with `jac_kept`.
    fn jacobian(&self, w: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_jac];
        self.nlp.jacobian_values(&self.x_of(w), &mut v);
        self.jac_kept.iter().map(|&(e, _, c)| v[e] * self.scale[c]).collect()
    }

    fn hessian(&self, w: &[f64], y: &[f64]) -> Vec<f64> {
        let mut lambda = vec![0.0; self.nlp.num_cons()];
        for (k, &r) in self.kept.iter().enumerate() {
            lambda[r] = y[k];
        }
        let mut v = vec![0.0; self.hess.len()];
        self.nlp.hessian_values(&self.x_of(w), self.obj_scale, &lambda, &mut v);
        for (val, &(i, j)) in v.iter_mut().zip(&self.hess) {
            *val *= self.scale[i] * self.scale[j];
        }
        v
    }

    fn jt_mul(&self, jv: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nw];
        for (v, &(_, k, c)) in jv.iter().zip(&self.jac_kept) {
            out[c] += v * y[k];
        }
        for (k, s) in self.slack.iter().enumerate() {
            if let Some(j) = s {
                out[*j] -= y[k];
            }
        }
        out
    }

    fn kkt_values(&self, hess: Option<&[f64]>, jv: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.entries.len());
        match hess {
            Some(h) => v.extend_from_slice(h),
            None => v.extend(std::iter::repeat_n(0.0, self.hess.len())),
        }
        v.extend_from_slice(jv);
        v.extend(self.slack.iter().flatten().map(|_| -1.0));
        v
    }

    fn barrier(&self, w: &[f64], f: f64, mu: f64) -> f64 {
        let mut b = f;
        for i in 0..self.nw {
            if self.lo[i].is_finite() {
                let d = w[i] - self.lo[i];
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                b -= mu * d.ln();
            }
            if self.hi[i].is_finite() {
                let d = self.hi[i] - w[i];
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                b -= mu * d.ln();
            }
        }
        b
    }

    /// Gradient of the barrier terms alone.
    fn barrier_gradient(&self, w: &[f64], mu: f64) -> Vec<f64> {
        (0..self.nw)
            .map(|i| {
                let mut g = 0.0;
                if self.lo[i].is_finite() {
                    g -= mu / (w[i] - self.lo[i]);
                }
                if self.hi[i].is_finite() {
                    g += mu / (self.hi[i] - w[i]);
                }
                g
            })
            .collect()
    }

    fn sigma(&self, w: &[f64], zl: &[f64], zu: &[f64]) -> Vec<f64> {
        (0..self.nw)
            .map(|i| {
                let mut s = 0.0;
                if self.lo[i].is_finite() {
                    s += zl[i] / (w[i] - self.lo[i]);
                }
                if self.hi[i].is_finite() {
                    s += zu[i] / (self.hi[i] - w[i]);
                }
                s
            })
            .collect()
    }

    /// Largest step in (0, 1] keeping `w + α d` a fraction `tau` inside the
    /// bounds.
    fn max_step(&self, w: &[f64], d: &[f64], tau: f64) -> f64 {
        let mut a = 1.0f64;
        for i in 0..self.nw {
            if d[i] < 0.0 && self.lo[i].is_finite() {
                a = a.min(-tau * (w[i] - self.lo[i]) / d[i]);
            }
            if d[i] > 0.0 && self.hi[i].is_finite() {
                a = a.min(tau * (self.hi[i] - w[i]) / d[i]);
            }
        }
        a
    }

    fn push_into_bounds(&self, w: &mut [f64]) {
        for i in 0..self.nw {
            let (l, u) = (self.lo[i], self.hi[i]);
            let width = u - l;
            if l.is_finite() {
                let p = (BOUND_PUSH * l.abs().max(1.0)).min(BOUND_PUSH * width);
                w[i] = w[i].max(l + p);
            }
            if u.is_finite() {
                let p = (BOUND_PUSH * u.abs().max(1.0)).min(BOUND_PUSH * width);
                w[i] = w[i].min(u - p);
            }
        }
    }

    /// Largest scaled violation of all rows, including redundant ones, and
    /// of the variable bounds, at the unscaled point `x`.
    fn violation(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.nlp.num_cons()];
        self.nlp.constraints(x, &mut g);
        let (gl, gu) = self.nlp.con_bounds();
        let (xl, xu) = self.nlp.var_bounds();
        let rows = g.iter().enumerate().map(|(r, &v)| (gl[r] - v).max(v - gu[r]));
        let vars = x
            .iter()
            .enumerate()
            .map(|(i, &v)| ((xl[i] - v).max(v - xu[i])) / self.scale[i]);
        rows.chain(vars)
            .fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    }
}

/// Factorization of the KKT matrix with a tiny static regularization of the
/// constraint block, solved with iterative refinement against the matrix
/// without it.
struct Kkt {
    ldl: SparseLdl,
    entries: Vec<(usize, usize)>,
    values: Vec<f64>,
    shift: Vec<f64>,
    true_shift: Vec<f64>,
    nw: usize,
    mk: usize,
}

impl Kkt {
    fn new(entries: Vec<(usize, usize)>, nw: usize, mk: usize) -> Result<Kkt, SolverError> {
        let ldl = SparseLdl::new(nw + mk, &entries).map_err(|_| SolverError::LinearSolveFailure)?;
        Ok(Kkt {
            ldl,
            values: vec![0.0; entries.len()],
            entries,
            shift: vec![0.0; nw + mk],
            true_shift: vec![0.0; nw + mk],
            nw,
            mk,
        })
    }

    fn factor(&mut self, values: Vec<f64>, diag_w: &[f64], delta_c: f64) -> Result<Inertia, LdlError> {
        self.values = values;
        self.shift[..self.nw].copy_from_slice(&diag_w[..self.nw]);
        self.true_shift[..self.nw].copy_from_slice(&diag_w[..self.nw]);
        for k in 0..self.mk {
            self.shift[self.nw + k] = -(delta_c + STATIC_REG);
            self.true_shift[self.nw + k] = -delta_c;
        }
        self.ldl.factor(&self.values, &self.shift)
    }

    fn correct_inertia(&self, inertia: &Inertia) -> bool {
        inertia.positive == self.nw && inertia.negative == self.mk && inertia.zero == 0
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.ldl.solve(&mut x);
        let mut ax = vec![0.0; rhs.len()];
        symmetric_matvec(&self.entries, &self.values, &self.true_shift, &x, &mut ax);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let target = 1e-14 * (1.0 + norm_inf(rhs));
        if norm_inf(&r) > target {
            if let Some(u) = self.gmres(&r, target) {
                for (xi, ui) in x.iter_mut().zip(&u) {
                    *xi += ui;
                }
            }
        }
        x
    }

    /// Right-preconditioned GMRES for `K u = r`, using the regularized
    /// factorization as preconditioner. Returns `None` if no improvement.
    fn gmres(&self, r: &[f64], target: f64) -> Option<Vec<f64>> {
        const MAX_KRYLOV: usize = 30;
        let n = r.len();
        let beta = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(beta > 0.0 && beta.is_finite()) {
            return None;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; MAX_KRYLOV]; MAX_KRYLOV + 1];
        let (mut cs, mut sn) = (vec![0.0; MAX_KRYLOV], vec![0.0; MAX_KRYLOV]);
        let mut g = vec![0.0; MAX_KRYLOV + 1];
        g[0] = beta;
        let mut w = vec![0.0; n];
        let mut k_used = 0;
        for k in 0..MAX_KRYLOV {
            let mut zk = v[k].clone();
            self.ldl.solve(&mut zk);
            symmetric_matvec(&self.entries, &self.values, &self.true_shift, &zk, &mut w);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if !(d > 0.0 && d.is_finite()) {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hn <= 1e-300 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        if k_used == 0 {
            return None;
        }
        let mut c = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * c[j]).sum();
            c[i] = (g[i] - s) / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (cj, zj) in c.iter().zip(&z) {
            for (ui, zi) in u.iter_mut().zip(zj) {
                *ui += cj * zi;
            }
        }
        u.iter().all(|x| x.is_finite()).then_some(u)
    }
}

#[derive(Debug, Default)]
struct Filter {
    entries: Vec<(f64, f64)>,
}

impl Filter {
    fn acceptable(&self, theta: f64, phi: f64) -> bool {
        self.entries.iter().all(|&(t, p)| theta < t || phi < p)
    }

    fn add(&mut self, theta: f64, phi: f64) {
        let (t, p) = ((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta);
        self.entries.retain(|&(et, ep)| et < t || ep < p);
        self.entries.push((t, p));
    }

    fn clear(&mut self) {
        self.entries.clear();
    }
}

struct Iterate {
    w: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

struct Errors {
    dual: f64,
    primal: f64,
    compl: f64,
}

enum Restoration {
    Success,
    Infeasible,
    IterationLimit,
}

/// Solves `nlp` from `x0` with a primal-dual interior point method.
pub fn solve_nlp<P: Nlp + ?Sized>(nlp: &P, x0: &[f64], opts: &SolverOptions) -> Result<NlpSolution, SolverError> {
    opts.validate()?;
    let start = Instant::now();
    let mut sp = Scaled::new(nlp);
    if x0.len() != sp.n {
        return Err(SolverError::DimensionMismatch {
            expected: sp.n,
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteStart("starting point"));
    }
    let (nw, mk) = (sp.nw, sp.mk);
    let tol = opts.feasibility_tol.min(opts.optimality_tol);

    let mut w = vec![0.0; nw];
    for i in 0..sp.n {
        w[i] = x0[i] / sp.scale[i];
    }
    sp.push_into_bounds(&mut w);
    {
        let mut g = vec![0.0; nlp.num_cons()];
        nlp.constraints(&sp.x_of(&w), &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteStart("constraints"));
        }
        for (k, &r) in sp.kept.iter().enumerate() {
            if let Some(j) = sp.slack[k] {
                w[j] = g[r];
            }
        }
    }
    sp.push_into_bounds(&mut w);
    let g0 = sp.gradient(&w);
    if g0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteStart("objective gradient"));
    }
    let gmax = norm_inf(&g0);
    sp.obj_scale = if gmax > 0.0 { (100.0 / gmax).min(1.0) } else { 1.0 };

    let mut kkt = Kkt::new(sp.entries.clone(), nw, mk)?;
    let zl: Vec<f64> = sp.lo.iter().map(|l| if l.is_finite() { 1.0 } else { 0.0 }).collect();
    let zu: Vec<f64> = sp.hi.iter().map(|u| if u.is_finite() { 1.0 } else { 0.0 }).collect();
    let mut it = Iterate {
        y: vec![0.0; mk],
        w,
        zl,
        zu,
    };
    it.y = least_squares_multipliers(&sp, &mut kkt, &it);

    let mut mu = opts.mu_init;
    let mut filter = Filter::default();
    let c0 = sp
        .constraints(&it.w)
        .ok_or(SolverError::NonFiniteStart("constraints"))?;
    let theta0 = norm_1(&c0);
    let theta_max = 1e4 * theta0.max(1.0);
    let theta_min = 1e-4 * theta0.max(1.0);
    let mut last_reg = 0.0;
    let mut history = Vec::new();
    let mut iter = 0usize;
    let mut status = SolveStatus::IterationLimit;

    loop {
        let c = match sp.constraints(&it.w) {
            Some(c) => c,
            None => return Err(SolverError::LinearSolveFailure),
        };
        let grad = sp.gradient(&it.w);
        let jv = sp.jacobian(&it.w);
        let jty = sp.jt_mul(&jv, &it.y);
        let e0 = errors(&sp, &it, &grad, &jty, &c, 0.0);
        if e0.dual <= opts.optimality_tol && e0.compl <= opts.optimality_tol && e0.primal <= opts.feasibility_tol {
            status = SolveStatus::Optimal;
            break;
        }
        if iter >= opts.max_iter {
            break;
        }
        loop {
            let e = errors(&sp, &it, &grad, &jty, &c, mu);
            let err = e.dual.max(e.primal).max(e.compl);
            let next = (tol / 10.0).max((opts.mu_linear_decrease * mu).min(mu.powf(opts.mu_superlinear_power)));
            if err > KAPPA_EPS * mu || next >= mu {
                break;
            }
            mu = next;
            filter.clear();
        }

        let sigma = sp.sigma(&it.w, &it.zl, &it.zu);
        let hess = sp.hessian(&it.w, &it.y);
        let values = sp.kkt_values(Some(&hess), &jv);
        let reg = factor_with_correction(&mut kkt, values, &sigma, mu, &mut last_reg, opts.regularization_floor)?;

        let bgrad = sp.barrier_gradient(&it.w, mu);
        let mut rhs = vec![0.0; nw + mk];
        for i in 0..nw {
            rhs[i] = -(grad[i] + bgrad[i] + jty[i]);
        }
        for k in 0..mk {
            rhs[nw + k] = -c[k];
        }
        let sol = kkt.solve(&rhs);
        let dw = &sol[..nw];
        let dy = &sol[nw..];

        let tau = (1.0 - mu).max(0.99);
        let alpha_max = sp.max_step(&it.w, dw, tau);
        let f = sp.objective(&it.w);
        let phi = sp.barrier(&it.w, f, mu);
        let theta = norm_1(&c);
        let dphi: f64 = (0..nw).map(|i| (grad[i] + bgrad[i]) * dw[i]).sum();

        let alpha_min = if dphi < 0.0 {
            let m = -dphi;
            let base = GAMMA_THETA.min(GAMMA_PHI * theta / m);
            if theta <= theta_min {
                GAMMA_ALPHA * base.min(theta.powf(S_THETA) / m.powf(S_PHI))
            } else {
                GAMMA_ALPHA * base
            }
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        };

        let accept = |theta_t: f64, phi_t: f64, alpha: f64, filter: &Filter| -> Option<StepKind> {
            if !(theta_t.is_finite() && phi_t.is_finite())
                || theta_t > theta_max
                || theta_t > THETA_GROWTH * theta.max(theta_min)
            {
                return None;
            }
            if !filter.acceptable(theta_t, phi_t) {
                return None;
            }
            let switching = dphi < 0.0 && alpha * (-dphi).powf(S_PHI) > theta.powf(S_THETA);
            if switching && theta <= theta_min {
                return (phi_t <= phi + ETA_PHI * alpha * dphi).then_some(StepKind::Objective);
            }
            (theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta)
                .then_some(StepKind::Feasibility)
        };

        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, f64, f64, f64, StepKind)> = None;
        let mut first = true;
        while alpha >= alpha_min {
            let wt: Vec<f64> = (0..nw).map(|i| it.w[i] + alpha * dw[i]).collect();
            if let Some(ct) = sp.constraints(&wt) {
                let theta_t = norm_1(&ct);
                let phi_t = sp.barrier(&wt, sp.objective(&wt), mu);
                if let Some(kind) = accept(theta_t, phi_t, alpha, &filter) {
                    accepted = Some((wt, alpha, theta_t, phi_t, kind));
                    break;
                }
                if first && theta_t >= theta {
                    if let Some(soc) =
                        second_order_correction(&sp, &kkt, &it, &rhs, &c, ct, alpha, tau, mu, &filter, &accept)
                    {
                        accepted = Some(soc);
                        break;
                    }
                }
            }
            first = false;
            alpha *= opts.backtrack_factor;
        }

        let Some((wt, alpha_pr, theta_t, phi_t, kind)) = accepted else {
            filter.add(theta, phi);
            match restoration(&sp, &mut kkt, &mut it, mu, &mut filter, &mut iter, &mut history, opts) {
                Restoration::Success => continue,
                Restoration::Infeasible => {
                    status = SolveStatus::InfeasibleDetected;
                    break;
                }
                Restoration::IterationLimit => break,
            }
        };
        if kind != StepKind::Objective {
            filter.add(theta, phi);
        }

        let dzl: Vec<f64> = (0..nw)
            .map(|i| {
                if sp.lo[i].is_finite() {
                    let d = it.w[i] - sp.lo[i];
                    mu / d - it.zl[i] - it.zl[i] / d * dw[i]
                } else {
                    0.0
                }
            })
            .collect();
        let dzu: Vec<f64> = (0..nw)
            .map(|i| {
                if sp.hi[i].is_finite() {
                    let d = sp.hi[i] - it.w[i];
                    mu / d - it.zu[i] + it.zu[i] / d * dw[i]
                } else {
                    0.0
                }
            })
            .collect();
        let mut alpha_du = 1.0f64;
        for i in 0..nw {
            if dzl[i] < 0.0 {
                alpha_du = alpha_du.min(-tau * it.zl[i] / dzl[i]);
            }
            if dzu[i] < 0.0 {
                alpha_du = alpha_du.min(-tau * it.zu[i] / dzu[i]);
            }
        }
        for k in 0..mk {
            it.y[k] += alpha_pr * dy[k];
        }
        for i in 0..nw {
            it.zl[i] += alpha_du * dzl[i];
            it.zu[i] += alpha_du * dzu[i];
        }
        it.w = wt;
        safeguard_multipliers(&sp, &mut it, mu);

        history.push(IterationRecord {
            iter,
            mu,
            objective: nlp.objective(&sp.x_of(&it.w)),
            theta,
            barrier: phi,
            theta_trial: theta_t,
            barrier_trial: phi_t,
            alpha_pr,
            alpha_du,
            kind,
            regularization: reg,
        });
        iter += 1;
    }

    if status == SolveStatus::Optimal && opts.polish {
        polish(&sp, &mut kkt, &mut it);
    }

    let mut x = sp.x_of(&it.w);
    let (xl, xu) = nlp.var_bounds();
    for i in 0..sp.n {
        x[i] = x[i].clamp(xl[i], xu[i]);
    }
    let c = sp.constraints(&it.w).unwrap_or_else(|| vec![f64::INFINITY; mk]);
    let grad = sp.gradient(&it.w);
    let jv = sp.jacobian(&it.w);
    let jty = sp.jt_mul(&jv, &it.y);
    let e = errors(&sp, &it, &grad, &jty, &c, 0.0);
    let mut lambda = vec![0.0; nlp.num_cons()];
    for (k, &r) in sp.kept.iter().enumerate() {
        lambda[r] = it.y[k] / sp.obj_scale;
    }
    let report = SolveReport {
        status,
        iterations: iter,
        objective: nlp.objective(&x),
        primal_infeasibility: sp.violation(&x),
        dual_infeasibility: e.dual,
        complementarity: e.compl,
        final_mu: mu,
        elapsed: start.elapsed(),
        history,
    };
    Ok(NlpSolution { x, lambda, report })
}

fn errors<P: Nlp + ?Sized>(sp: &Scaled<P>, it: &Iterate, grad: &[f64], jty: &[f64], c: &[f64], mu: f64) -> Errors {
    let nw = sp.nw;
    let z1 = norm_1(&it.zl) + norm_1(&it.zu);
    let s_d = (S_MAX.max((norm_1(&it.y) + z1) / (sp.mk + 2 * nw).max(1) as f64)) / S_MAX;
    let s_c = (S_MAX.max(z1 / (2 * nw).max(1) as f64)) / S_MAX;
    let mut dual = 0.0f64;
    let mut compl = 0.0f64;
    for i in 0..nw {
        dual = dual.max((grad[i] + jty[i] - it.zl[i] + it.zu[i]).abs());
        if sp.lo[i].is_finite() {
            compl = compl.max(((it.w[i] - sp.lo[i]) * it.zl[i] - mu).abs());
        }
        if sp.hi[i].is_finite() {
            compl = compl.max(((sp.hi[i] - it.w[i]) * it.zu[i] - mu).abs());
        }
    }
    Errors {
        dual: dual / s_d,
        primal: norm_inf(c),
        compl: compl / s_c,
    }
}

fn factor_with_correction(
    kkt: &mut Kkt,
    values: Vec<f64>,
    sigma: &[f64],
    mu: f64,
    last_reg: &mut f64,
    floor: f64,
) -> Result<f64, SolverError> {
    let mut delta_c = 0.0;
    match kkt.factor(values.clone(), sigma, 0.0) {
        Ok(inertia) if kkt.correct_inertia(&inertia) => return Ok(0.0),
        Ok(_) => {}
        Err(LdlError::ZeroPivot(_)) => delta_c = 1e-8 * mu.powf(0.25),
        Err(_) => return Err(SolverError::LinearSolveFailure),
    }
    let mut delta_w = if *last_reg == 0.0 {
        1e-4
    } else {
        floor.max(*last_reg / 3.0)
    };
    let growth = if *last_reg == 0.0 { 100.0 } else { 8.0 };
    let mut shifted = vec![0.0; sigma.len()];
    while delta_w < 1e40 {
        for (s, &v) in shifted.iter_mut().zip(sigma) {
            *s = v + delta_w;
        }
        match kkt.factor(values.clone(), &shifted, delta_c) {
            Ok(inertia) if kkt.correct_inertia(&inertia) => {
                *last_reg = delta_w;
                return Ok(delta_w);
            }
            Ok(_) => {}
            Err(LdlError::ZeroPivot(_)) => {
                if delta_c == 0.0 {
                    delta_c = 1e-8 * mu.powf(0.25);
                }
            }
            Err(_) => return Err(SolverError::LinearSolveFailure),
        }
        delta_w *= growth;
    }
    Err(SolverError::LinearSolveFailure)
}

type Accepted = (Vec<f64>, f64, f64, f64, StepKind);

#[allow(clippy::too_many_arguments)]
fn second_order_correction<P: Nlp + ?Sized>(
    sp: &Scaled<P>,
    kkt: &Kkt,
    it: &Iterate,
    rhs: &[f64],
    c: &[f64],
    c_trial: Vec<f64>,
    alpha: f64,
    tau: f64,
    mu: f64,
    filter: &Filter,
    accept: &dyn Fn(f64, f64, f64, &Filter) -> Option<StepKind>,
) -> Option<Accepted> {
    let nw = sp.nw;
    let mut c_soc: Vec<f64> = c.iter().zip(&c_trial).map(|(a, b)| alpha * a + b).collect();
    let mut theta_old = norm_1(&c_trial);
    let mut rhs = rhs.to_vec();
    for _ in 0..MAX_SOC {
        for (k, v) in c_soc.iter().enumerate() {
            rhs[nw + k] = -v;
        }
        let sol = kkt.solve(&rhs);
        let d = &sol[..nw];
        let a = sp.max_step(&it.w, d, tau);
        let wt: Vec<f64> = (0..nw).map(|i| it.w[i] + a * d[i]).collect();
        let ct = sp.constraints(&wt)?;
        let theta_t = norm_1(&ct);
        let phi_t = sp.barrier(&wt, sp.objective(&wt), mu);
        if let Some(kind) = accept(theta_t, phi_t, alpha, filter) {
            let kind = if kind == StepKind::Objective {
                kind
            } else {
                StepKind::SecondOrder
            };
            return Some((wt, a, theta_t, phi_t, kind));
        }
        if theta_t > KAPPA_SOC * theta_old {
            return None;
        }
        theta_old = theta_t;
        for (cs, v) in c_soc.iter_mut().zip(&ct) {
            *cs = a * *cs + v;
        }
    }
    None
}

fn safeguard_multipliers<P: Nlp + ?Sized>(sp: &Scaled<P>, it: &mut Iterate, mu: f64) {
    for i in 0..sp.nw {
        if sp.lo[i].is_finite() {
            let d = it.w[i] - sp.lo[i];
            it.zl[i] = it.zl[i].clamp(mu / (KAPPA_SIGMA * d), KAPPA_SIGMA * mu / d);
        }
        if sp.hi[i].is_finite() {
            let d = sp.hi[i] - it.w[i];
            it.zu[i] = it.zu[i].clamp(mu / (KAPPA_SIGMA * d), KAPPA_SIGMA * mu / d);
        }
    }
}

/// Multipliers minimizing the dual residual at the current point, or zero
/// when they come out too large.
fn least_squares_multipliers<P: Nlp + ?Sized>(sp: &Scaled<P>, kkt: &mut Kkt, it: &Iterate) -> Vec<f64> {
    let nw = sp.nw;
    let zeros = vec![0.0; sp.mk];
    let jv = sp.jacobian(&it.w);
    if jv.iter().any(|v| !v.is_finite()) {
        return zeros;
    }
    let values = sp.kkt_values(None, &jv);
    match kkt.factor(values, &vec![1.0; nw], 0.0) {
        Ok(inertia) if kkt.correct_inertia(&inertia) => {}
        _ => return zeros,
    }
    let grad = sp.gradient(&it.w);
    let mut rhs = vec![0.0; nw + sp.mk];
    for i in 0..nw {
        rhs[i] = -(grad[i] - it.zl[i] + it.zu[i]);
    }
    let sol = kkt.solve(&rhs);
    let y = sol[nw..].to_vec();
    if norm_inf(&y) > MAX_MULTIPLIER_INIT || y.iter().any(|v| !v.is_finite()) {
        zeros
    } else {
        y
    }
}

/// Regularized Gauss-Newton steps on the constraint violation that keep the
/// iterate inside the bounds, until the filter accepts the point again.
#[allow(clippy::too_many_arguments)]
fn restoration<P: Nlp + ?Sized>(
    sp: &Scaled<P>,
    kkt: &mut Kkt,
    it: &mut Iterate,
    mu: f64,
    filter: &mut Filter,
    iter: &mut usize,
    history: &mut Vec<IterationRecord>,
    opts: &SolverOptions,
) -> Restoration {
    let nw = sp.nw;
    let mk = sp.mk;
    let Some(c0) = sp.constraints(&it.w) else {
        return Restoration::Infeasible;
    };
    let theta_start = norm_1(&c0);
    let mut best = theta_start;
    let mut stall = 0usize;
    let mut first = true;
    loop {
        let c = sp.constraints(&it.w).expect("restoration keeps constraints finite");
        let theta = norm_1(&c);
        let phi = sp.barrier(&it.w, sp.objective(&it.w), mu);
        if !first
            && filter.acceptable(theta, phi)
            && (theta <= 0.9 * theta_start || norm_inf(&c) <= 1e-3 * opts.feasibility_tol)
        {
            break;
        }
        first = false;
        if stall >= opts.restoration_stall_iters {
            if norm_inf(&c) > 1e3 * opts.feasibility_tol {
                return Restoration::Infeasible;
            }
            filter.clear();
            break;
        }
        if *iter >= opts.max_iter {
            return Restoration::IterationLimit;
        }

        let mu_r = mu.min(1e-2 * norm_inf(&c)).max(1e-16);
        let zeta = mu.sqrt();
        let jv = sp.jacobian(&it.w);
        let diag: Vec<f64> = (0..nw)
            .map(|i| {
                let mut d = zeta;
                if sp.lo[i].is_finite() {
                    d += mu_r / (it.w[i] - sp.lo[i]).powi(2);
                }
                if sp.hi[i].is_finite() {
                    d += mu_r / (sp.hi[i] - it.w[i]).powi(2);
                }
                d
            })
            .collect();
        let values = sp.kkt_values(None, &jv);
        match kkt.factor(values, &diag, 1.0) {
            Ok(inertia) if kkt.correct_inertia(&inertia) => {}
            _ => return Restoration::Infeasible,
        }
        let bgrad = sp.barrier_gradient(&it.w, mu_r);
        let mut rhs = vec![0.0; nw + mk];
        for i in 0..nw {
            rhs[i] = -bgrad[i];
        }
        for k in 0..mk {
            rhs[nw + k] = -c[k];
        }
        let sol = kkt.solve(&rhs);
        let d = &sol[..nw];
        let merit = |w: &[f64], c: &[f64]| 0.5 * dot(c, c) + sp.barrier(w, 0.0, mu_r);
        let psi = merit(&it.w, &c);
        let jtc = sp.jt_mul(&jv, &c);
        let dpsi: f64 = (0..nw).map(|i| (jtc[i] + bgrad[i]) * d[i]).sum();
        let tau = (1.0 - mu).max(0.99);
        let mut alpha = sp.max_step(&it.w, d, tau);
        let mut moved = None;
        while alpha > 1e-12 {
            let wt: Vec<f64> = (0..nw).map(|i| it.w[i] + alpha * d[i]).collect();
            if let Some(ct) = sp.constraints(&wt) {
                if merit(&wt, &ct) <= psi + 1e-4 * alpha * dpsi.min(0.0) {
                    moved = Some((wt, ct, alpha));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((wt, ct, alpha)) = moved else {
            stall = opts.restoration_stall_iters;
            continue;
        };
        let theta_t = norm_1(&ct);
        if theta_t < 0.99 * best {
            best = theta_t;
            stall = 0;
        } else {
            stall += 1;
        }
        it.w = wt;
        history.push(IterationRecord {
            iter: *iter,
            mu,
            objective: sp.nlp.objective(&sp.x_of(&it.w)),
            theta,
            barrier: phi,
            theta_trial: theta_t,
            barrier_trial: sp.barrier(&it.w, sp.objective(&it.w), mu),
            alpha_pr: alpha,
            alpha_du: 0.0,
            kind: StepKind::Restoration,
            regularization: zeta,
        });
        *iter += 1;
    }
    for i in 0..nw {
        if sp.lo[i].is_finite() {
            it.zl[i] = (mu / (it.w[i] - sp.lo[i])).min(1e3);
        }
        if sp.hi[i].is_finite() {
            it.zu[i] = (mu / (sp.hi[i] - it.w[i])).min(1e3);
        }
    }
    it.y = least_squares_multipliers(sp, kkt, it);
    Restoration::Success
}

/// Minimum-norm corrections driving the equality residuals to roundoff,
/// weighted so that variables close to their bounds barely move.
fn polish<P: Nlp + ?Sized>(sp: &Scaled<P>, kkt: &mut Kkt, it: &mut Iterate) {
    let nw = sp.nw;
    let sigma = sp.sigma(&it.w, &it.zl, &it.zu);
    let diag: Vec<f64> = sigma.iter().map(|s| 1.0 + s).collect();
    for _ in 0..10 {
        let Some(c) = sp.constraints(&it.w) else { return };
        let norm = norm_inf(&c);
        if norm <= POLISH_TARGET {
            return;
        }
        let jv = sp.jacobian(&it.w);
        let values = sp.kkt_values(None, &jv);
        match kkt.factor(values, &diag, 0.0) {
            Ok(inertia) if kkt.correct_inertia(&inertia) => {}
            _ => return,
        }
        let mut rhs = vec![0.0; nw + sp.mk];
        for (k, v) in c.iter().enumerate() {
            rhs[nw + k] = -v;
        }
        let sol = kkt.solve(&rhs);
        let d = &sol[..nw];
        let a = sp.max_step(&it.w, d, 0.99);
        let wt: Vec<f64> = (0..nw).map(|i| it.w[i] + a * d[i]).collect();
        match sp.constraints(&wt) {
            Some(ct) if norm_inf(&ct) < norm => it.w = wt,
            _ => return,
        }
    }
}
