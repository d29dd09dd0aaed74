//! Unconstrained limited-memory BFGS with a strong-Wolfe line search.
//!
//! Directions come from the two-loop recursion over the last `memory`
//! `(s, y)` pairs with the usual `s'y / y'y` initial scaling. A pair is stored
//! only when `s'y > 0`. The line search brackets a step satisfying both Wolfe
//! conditions and then zooms with safeguarded cubic interpolation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    /// Stored correction pairs; 0 degrades to steepest descent.
    pub memory: usize,
    pub max_iters: usize,
    /// Infinity-norm threshold on the gradient.
    pub grad_tol: f64,
    pub f_rel_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Trial steps allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200_000,
            grad_tol: 1e-8,
            f_rel_tol: 1e-12,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_line_search: 50,
        }
    }
}

impl LbfgsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidConfig("need 0 < c1 < c2 < 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.max_line_search == 0 {
            return Err(Error::InvalidConfig("max_line_search must be >= 1".into()));
        }
        if !(self.grad_tol >= 0.0 && self.f_rel_tol >= 0.0) {
            return Err(Error::InvalidConfig("tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    FRelTol,
    MaxIters,
    LineSearchFailure,
    /// The objective went non-finite; the result holds the last good iterate.
    NonFiniteObjective,
}

/// Objective value, gradient and whatever side information the caller wants
/// handed to the progress callback.
#[derive(Debug, Clone)]
pub struct Evaluation<I> {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub info: I,
}

impl<I> Evaluation<I> {
    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult<I> {
    pub final_params: Vec<f64>,
    pub final_loss: f64,
    pub final_info: I,
    /// Accepted steps.
    pub iterations: usize,
    /// Objective after each accepted step.
    pub loss_history: Vec<f64>,
    pub termination: Termination,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct History {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        if self.memory == 0 {
            return;
        }
        let sy = dot(&s, &y);
        if sy <= 0.0 || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// `-H g` by the two-loop recursion.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }
}

struct Trial<I> {
    alpha: f64,
    eval: Evaluation<I>,
    slope: f64,
}

enum Search<I> {
    Accepted(Trial<I>),
    Failed,
}

/// Minimizer of the cubic through two points with known slopes, if any.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc.is_nan() || disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let m = b - (b - a) * (db + d2 - d1) / denom;
    m.is_finite().then_some(m)
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
}

impl<F, I> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Evaluation<I>,
{
    fn eval(&mut self, alpha: f64) -> Trial<I> {
        let point: Vec<f64> = self
            .x
            .iter()
            .zip(self.dir)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        self.budget -= 1;
        self.evaluations += 1;
        let eval = (self.objective)(&point);
        let slope = dot(&eval.gradient, self.dir);
        Trial { alpha, eval, slope }
    }

    fn armijo_fails(&self, t: &Trial<I>) -> bool {
        !t.eval.is_finite() || t.eval.value > self.f0 + self.c1 * t.alpha * self.slope0
    }

    fn curvature_holds(&self, t: &Trial<I>) -> bool {
        t.slope.abs() <= -self.c2 * self.slope0
    }

    fn run(&mut self, alpha_init: f64) -> Search<I> {
        let mut prev = (0.0, self.f0, self.slope0);
        let mut alpha = alpha_init;
        let mut first = true;
        while self.budget > 0 {
            let t = self.eval(alpha);
            if self.armijo_fails(&t) || (!first && t.eval.value >= prev.1) {
                let hi = (t.alpha, t.eval.value, t.slope, t.eval.is_finite());
                return self.zoom((prev.0, prev.1, prev.2), hi);
            }
            if self.curvature_holds(&t) {
                return Search::Accepted(t);
            }
            if t.slope >= 0.0 {
                let lo = (t.alpha, t.eval.value, t.slope);
                return self.zoom(lo, (prev.0, prev.1, prev.2, true));
            }
            prev = (t.alpha, t.eval.value, t.slope);
            alpha = 2.0 * t.alpha;
            first = false;
        }
        Search::Failed
    }

    fn zoom(&mut self, mut lo: (f64, f64, f64), mut hi: (f64, f64, f64, bool)) -> Search<I> {
        while self.budget > 0 {
            let (a, b) = (lo.0, hi.0);
            let width = (b - a).abs();
            if width <= f64::EPSILON * a.abs().max(b.abs()) {
                return Search::Failed;
            }
            let (left, right) = (a.min(b), a.max(b));
            let guard = 0.1 * width;
            let alpha = if hi.3 {
                cubic_min(a, lo.1, lo.2, b, hi.1, hi.2)
                    .filter(|m| *m > left + guard && *m < right - guard)
                    .unwrap_or(0.5 * (a + b))
            } else {
                0.5 * (a + b)
            };
            let t = self.eval(alpha);
            if self.armijo_fails(&t) || t.eval.value >= lo.1 {
                hi = (t.alpha, t.eval.value, t.slope, t.eval.is_finite());
            } else {
                if self.curvature_holds(&t) {
                    return Search::Accepted(t);
                }
                if t.slope * (hi.0 - lo.0) >= 0.0 {
                    hi = (lo.0, lo.1, lo.2, true);
                }
                lo = (t.alpha, t.eval.value, t.slope);
            }
        }
        Search::Failed
    }
}

/// Minimize `objective` from `x0`. `progress` is called once per accepted step
/// with the 1-based iteration number and that step's side information.
pub fn minimize<I, F, P>(
    mut objective: F,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
    mut progress: P,
) -> Result<OptimResult<I>>
where
    F: FnMut(&[f64]) -> Evaluation<I>,
    P: FnMut(usize, &I),
{
    opts.validate()?;
    let mut x = x0;
    let mut current = objective(&x);
    if !current.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut evaluations = 1;
    let mut history = History {
        memory: opts.memory,
        pairs: VecDeque::new(),
    };
    let mut loss_history = Vec::new();

    let finish = |x: Vec<f64>, current: Evaluation<I>, loss_history: Vec<f64>, termination, evaluations| {
        Ok(OptimResult {
            final_params: x,
            final_loss: current.value,
            final_info: current.info,
            iterations: loss_history.len(),
            loss_history,
            termination,
            evaluations,
        })
    };

    if inf_norm(&current.gradient) < opts.grad_tol {
        return finish(x, current, loss_history, Termination::GradTol, evaluations);
    }

    loop {
        let mut dir = history.direction(&current.gradient);
        let mut slope0 = dot(&dir, &current.gradient);
        if slope0.is_nan() || slope0 >= 0.0 {
            history.clear();
            dir = history.direction(&current.gradient);
            slope0 = dot(&dir, &current.gradient);
        }
        let mut search = |dir: &[f64], slope0: f64, alpha_init: f64| {
            let mut ls = LineSearch {
                objective: &mut objective,
                x: &x,
                dir,
                f0: current.value,
                slope0,
                c1: opts.wolfe_c1,
                c2: opts.wolfe_c2,
                budget: opts.max_line_search,
                evaluations: 0,
            };
            let out = ls.run(alpha_init);
            (out, ls.evaluations)
        };

        let steepest = history.pairs.is_empty();
        let alpha_init = if steepest {
            (1.0 / inf_norm(&current.gradient)).min(1.0)
        } else {
            1.0
        };
        let (mut outcome, used) = search(&dir, slope0, alpha_init);
        evaluations += used;
        if matches!(outcome, Search::Failed) && !steepest {
            // Retry once along the gradient with fresh curvature information.
            history.clear();
            dir = history.direction(&current.gradient);
            slope0 = dot(&dir, &current.gradient);
            let (retry, used) = search(&dir, slope0, (1.0 / inf_norm(&current.gradient)).min(1.0));
            evaluations += used;
            outcome = retry;
        }

        let trial = match outcome {
            Search::Accepted(t) => t,
            Search::Failed => {
                return finish(
                    x,
                    current,
                    loss_history,
                    Termination::LineSearchFailure,
                    evaluations,
                );
            }
        };
        if !trial.eval.is_finite() {
            return finish(
                x,
                current,
                loss_history,
                Termination::NonFiniteObjective,
                evaluations,
            );
        }

        let s: Vec<f64> = dir.iter().map(|d| trial.alpha * d).collect();
        let y: Vec<f64> = trial
            .eval
            .gradient
            .iter()
            .zip(&current.gradient)
            .map(|(a, b)| a - b)
            .collect();
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        history.push(s, y);

        let f_old = current.value;
        current = trial.eval;
        loss_history.push(current.value);
        progress(loss_history.len(), &current.info);

        if inf_norm(&current.gradient) < opts.grad_tol {
            return finish(x, current, loss_history, Termination::GradTol, evaluations);
        }
        let scale = f_old.abs().max(current.value.abs()).max(1.0);
        if (f_old - current.value).abs() <= opts.f_rel_tol * scale {
            return finish(x, current, loss_history, Termination::FRelTol, evaluations);
        }
        if loss_history.len() >= opts.max_iters {
            return finish(x, current, loss_history, Termination::MaxIters, evaluations);
        }
    }
}
