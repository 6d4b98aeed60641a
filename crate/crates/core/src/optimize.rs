//! Box-constrained minimization: a projected limited-memory BFGS method with
//! finite-difference gradients, plus a bounded Nelder–Mead fallback.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step moves no coordinate by more than this.
    pub step_tol: f64,
    /// Relative finite-difference step; the absolute step is at least `1e-9`.
    pub fd_step: f64,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub f_rel_tol: f64,
    /// Number of stored correction pairs.
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            fd_step: 1e-6,
            f_rel_tol: 1e7 * f64::EPSILON,
            memory: 6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.memory > 0
            && [self.grad_tol, self.step_tol, self.fd_step, self.f_rel_tol]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Config("bound vectors differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config(format!(
                "lower bounds must be strictly below upper bounds: {lower:?} vs {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((xi, l), u)| xi >= l && xi <= u)
    }
}

/// Why a minimization stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailure,
    /// The simplex fallback ran; the flag says whether it met its tolerance.
    Simplex { converged: bool },
}

impl StopReason {
    pub fn converged(self) -> bool {
        match self {
            Self::GradientTolerance | Self::StepTolerance | Self::FunctionTolerance => true,
            Self::MaxIterations | Self::LineSearchFailure => false,
            Self::Simplex { converged } => converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective value after each accepted step, starting with `f(x0)`.
    pub history: Vec<f64>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.reason.converged()
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
const FD_FLOOR: f64 = 1e-9;

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Central differences, one-sided where the stencil would cross a bound.
fn gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    bounds: &BoxBounds,
    rel: f64,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = (rel * x[i].abs()).max(FD_FLOOR);
        let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
        let can_up = x[i] + h <= hi;
        let can_down = x[i] - h >= lo;
        let mut at = |v: f64| {
            probe[i] = v;
            let r = eval(f, &probe);
            probe[i] = x[i];
            r
        };
        let up = if can_up { at(x[i] + h) } else { f64::INFINITY };
        let down = if can_down { at(x[i] - h) } else { f64::INFINITY };
        g[i] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - fx) / h,
            (false, true) => (fx - down) / h,
            (false, false) => {
                // Box narrower than the stencil: difference across the box.
                let (a, b) = (lo.max(x[i] - h), hi.min(x[i] + h));
                let (fa, fb) = (at(a), at(b));
                if fa.is_finite() && fb.is_finite() && b > a {
                    (fb - fa) / (b - a)
                } else {
                    0.0
                }
            }
        };
    }
    g
}

/// Coordinates held at a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], bounds: &BoxBounds) -> Vec<bool> {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            (xi <= bounds.lower[i] && gi > 0.0) || (xi >= bounds.upper[i] && gi < 0.0)
        })
        .collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| (xi - (xi - gi).clamp(bounds.lower[i], bounds.upper[i])).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &free)| free)
        .map(|((x, y), _)| x * y)
        .sum()
}

/// Two-loop recursion over the free coordinates; returns the search direction.
fn lbfgs_direction(g: &[f64], pairs: &[(Vec<f64>, Vec<f64>)], free: &[bool]) -> Vec<f64> {
    let mut q: Vec<f64> = g
        .iter()
        .zip(free)
        .map(|(&gi, &f)| if f { gi } else { 0.0 })
        .collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let sy = dot(s, y, free);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(s, &q, free) / sy;
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.last() {
        let (sy, yy) = (dot(s, y, free), dot(y, y, free));
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y), a) in pairs.iter().zip(alphas.iter().rev()) {
        let sy = dot(s, y, free);
        if sy <= 0.0 {
            continue;
        }
        let b = dot(y, &q, free) / sy;
        for i in 0..q.len() {
            if free[i] {
                q[i] += (a - b) * s[i];
            }
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` over the box starting from the projection of `x0`.
///
/// Returns [`Error::NonFiniteStart`] when `f` is not finite at the start.
/// Hitting the iteration cap or failing a line search is reported through
/// [`Minimum::reason`] together with the best iterate.
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    cfg: &OptimizerConfig,
) -> Result<Minimum> {
    cfg.validate()?;
    if x0.len() != bounds.dim() {
        return Err(Error::Config(format!(
            "start has dimension {} but bounds have {}",
            x0.len(),
            bounds.dim()
        )));
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = eval(&f, &x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteStart(x));
    }
    let mut g = gradient(&f, &x, fx, bounds, cfg.fd_step);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut history = vec![fx];

    let finish = |x: Vec<f64>, fx: f64, it: usize, reason: StopReason, history: Vec<f64>| Minimum {
        x,
        f: fx,
        iterations: it,
        reason,
        history,
    };

    for iter in 0..cfg.max_iter {
        if projected_gradient_norm(&x, &g, bounds) < cfg.grad_tol {
            return Ok(finish(x, fx, iter, StopReason::GradientTolerance, history));
        }
        let active = active_set(&x, &g, bounds);
        let free: Vec<bool> = active.iter().map(|a| !a).collect();

        let mut accepted = None;
        // Retry once with steepest descent and cleared memory before giving up.
        for attempt in 0..2 {
            let mut d = if attempt == 0 && !pairs.is_empty() {
                lbfgs_direction(&g, &pairs, &free)
            } else {
                g.iter()
                    .zip(&free)
                    .map(|(&gi, &fr)| if fr { -gi } else { 0.0 })
                    .collect()
            };
            if dot(&d, &g, &free) >= 0.0 {
                d = g
                    .iter()
                    .zip(&free)
                    .map(|(&gi, &fr)| if fr { -gi } else { 0.0 })
                    .collect();
            }
            let d_norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d_norm == 0.0 {
                break;
            }
            let mut t = if pairs.is_empty() {
                (1.0 / d_norm).min(1.0)
            } else {
                1.0
            };
            for _ in 0..MAX_BACKTRACKS {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                bounds.project(&mut trial);
                let decrease: f64 = g
                    .iter()
                    .zip(trial.iter().zip(&x))
                    .map(|(gi, (a, b))| gi * (a - b))
                    .sum();
                let ft = eval(&f, &trial);
                if ft.is_finite() && ft <= fx + ARMIJO_C1 * decrease {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            pairs.clear();
        }

        let Some((x_new, f_new)) = accepted else {
            return Ok(finish(x, fx, iter, StopReason::LineSearchFailure, history));
        };
        let g_new = gradient(&f, &x_new, f_new, bounds, cfg.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rel_change = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);

        let all = vec![true; s.len()];
        let sy = dot(&s, &y, &all);
        if sy > f64::EPSILON * dot(&y, &y, &all) {
            if pairs.len() == cfg.memory {
                pairs.remove(0);
            }
            pairs.push((s, y));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);

        if step < cfg.step_tol {
            return Ok(finish(x, fx, iter + 1, StopReason::StepTolerance, history));
        }
        if rel_change <= cfg.f_rel_tol {
            return Ok(finish(x, fx, iter + 1, StopReason::FunctionTolerance, history));
        }
    }
    Ok(finish(x, fx, cfg.max_iter, StopReason::MaxIterations, history))
}

const MAX_SIMPLEX_RESTARTS: usize = 5;

/// Nelder–Mead simplex search with every trial point projected onto the box.
/// Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    cfg: &OptimizerConfig,
) -> Result<Minimum> {
    cfg.validate()?;
    let dim = x0.len();
    if dim != bounds.dim() {
        return Err(Error::Config("start and bounds differ in dimension".into()));
    }
    let value = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut start = x0.to_vec();
    bounds.project(&mut start);
    let build = |start: &[f64]| {
        let mut simplex = vec![start.to_vec()];
        for i in 0..dim {
            let mut v = start.to_vec();
            let h = 0.05 * start[i].abs().max(1.0);
            v[i] += h;
            if v[i] > bounds.upper[i] {
                v[i] = start[i] - h;
            }
            bounds.project(&mut v);
            simplex.push(v);
        }
        let fs: Vec<f64> = simplex.iter().map(|v| value(v)).collect();
        (simplex, fs)
    };
    let (mut simplex, mut fs) = build(&start);
    if fs.iter().all(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStart(start));
    }
    // A simplex flattened against a bound can stall; restart from the best
    // vertex until a restart brings no improvement.
    let mut restarts = 0;
    let mut f_at_restart = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let trial_point = |centroid: &[f64], worst: &[f64], coef: f64| {
        let mut p: Vec<f64> = centroid
            .iter()
            .zip(worst)
            .map(|(c, w)| c + coef * (w - c))
            .collect();
        bounds.project(&mut p);
        p
    };
    let max_iter = cfg.max_iter * dim.max(1) * 2;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fs = order.iter().map(|&i| fs[i]).collect();
        history.push(fs[0]);

        let spread = fs[dim] - fs[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fs[dim].is_finite()
            && spread <= cfg.f_rel_tol * fs[0].abs().max(1.0)
            && size <= cfg.step_tol.max(1e-8) * (1.0 + simplex[0].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        {
            let improved = fs[0] < f_at_restart - cfg.f_rel_tol * fs[0].abs().max(1.0);
            if improved && restarts < MAX_SIMPLEX_RESTARTS {
                restarts += 1;
                f_at_restart = fs[0];
                (simplex, fs) = build(&simplex[0].clone());
                continue;
            }
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let reflected = trial_point(&centroid, &simplex[dim], -1.0);
        let fr = value(&reflected);
        if fr < fs[0] {
            let expanded = trial_point(&centroid, &simplex[dim], -2.0);
            let fe = value(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                fs[dim] = fe;
            } else {
                simplex[dim] = reflected;
                fs[dim] = fr;
            }
            continue;
        }
        if fr < fs[dim - 1] {
            simplex[dim] = reflected;
            fs[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < fs[dim] {
            let p = trial_point(&centroid, &simplex[dim], -0.5);
            let v = value(&p);
            (p, v)
        } else {
            let p = trial_point(&centroid, &simplex[dim], 0.5);
            let v = value(&p);
            (p, v)
        };
        if fc < fs[dim].min(fr) {
            simplex[dim] = contracted;
            fs[dim] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=dim {
            let mut p: Vec<f64> = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            bounds.project(&mut p);
            fs[i] = value(&p);
            simplex[i] = p;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| fs[a].total_cmp(&fs[b]))
        .expect("non-empty simplex");
    Ok(Minimum {
        x: simplex[best].clone(),
        f: fs[best],
        iterations,
        reason: StopReason::Simplex { converged },
        history,
    })
}

/// Runs [`minimize`]; after a start error or a failed line search the simplex
/// method takes over from the best point found so far.
pub fn minimize_with_fallback<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    cfg: &OptimizerConfig,
) -> Result<Minimum> {
    match minimize(&f, x0, bounds, cfg) {
        Ok(m) if m.reason == StopReason::LineSearchFailure => {
            let simplex = nelder_mead(&f, &m.x, bounds, cfg)?;
            Ok(if simplex.f <= m.f { simplex } else { m })
        }
        Ok(m) => Ok(m),
        Err(Error::NonFiniteStart(_)) => nelder_mead(&f, x0, bounds, cfg),
        Err(e) => Err(e),
    }
}
