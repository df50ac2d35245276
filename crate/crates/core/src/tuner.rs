//! Choosing the smoothing scale `λ`: a grid scan brackets the best value,
//! then Brent's method (golden section plus successive parabolic
//! interpolation, no derivatives) refines it.

use std::sync::Arc;

use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::objectives::{evaluate_objective, DevSet, Direction, ObjectiveKind};
use crate::smoothing::{AddingStrategy, StrategyKind};
use crate::trainer::{train, TrainConfig};

/// `(3 − √5) / 2`
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Clone, Debug, PartialEq)]
pub struct TuneConfig<T> {
    /// Candidate scales, ascending, all ≥ 0.
    pub grid: Vec<T>,
    /// Absolute tolerance on `λ` for the refinement phase.
    pub tolerance: T,
    pub max_refine_evals: usize,
}

impl<T: Real> Default for TuneConfig<T> {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            tolerance: T::lit(1e-4),
            max_refine_evals: 100,
        }
    }
}

impl<T: Real> TuneConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 3 {
            return Err(Error::argument("the tuning grid needs at least 3 points"));
        }
        if self.grid.iter().any(|&g| !(g >= T::zero()) || !g.is_finite()) {
            return Err(Error::argument("grid points must be finite and ≥ 0"));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::argument("grid points must be strictly ascending"));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::argument("tolerance must be positive"));
        }
        Ok(())
    }
}

/// `0` followed by `10^k` for `k = −4, −3.75, …, 4`.
pub fn default_grid<T: Real>() -> Vec<T> {
    std::iter::once(T::zero())
        .chain((-16..=16).map(|q| T::lit(10f64.powf(f64::from(q) / 4.0))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketKind {
    /// `mid` is an interior grid point at least as good as its neighbours.
    Interior,
    /// The best grid point is the first one; `lo == mid`.
    LeftEndpoint,
    /// The best grid point is the last one; `mid == hi`.
    RightEndpoint,
}

/// Three abscissae with their objective values, `lo ≤ mid ≤ hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket<T> {
    pub lo: (T, T),
    pub mid: (T, T),
    pub hi: (T, T),
    pub kind: BracketKind,
}

impl<T: Real> Bracket<T> {
    /// Evaluates `f` at three points to form an interior bracket.
    pub fn evaluate<F>(f: &mut F, lo: T, mid: T, hi: T) -> Result<Self>
    where
        F: FnMut(T) -> Result<T>,
    {
        Ok(Self {
            lo: (lo, f(lo)?),
            mid: (mid, f(mid)?),
            hi: (hi, f(hi)?),
            kind: BracketKind::Interior,
        })
    }

    /// Whether the middle value is strictly below both end values.
    pub fn is_valid_minimum(&self) -> bool {
        self.kind == BracketKind::Interior
            && self.lo.0 < self.mid.0
            && self.mid.0 < self.hi.0
            && self.mid.1 < self.lo.1
            && self.mid.1 < self.hi.1
    }

    fn negated(self) -> Self {
        let neg = |(x, v): (T, T)| (x, -v);
        Self {
            lo: neg(self.lo),
            mid: neg(self.mid),
            hi: neg(self.hi),
            kind: self.kind,
        }
    }
}

fn comparable<T: Real>(v: T) -> bool {
    v.is_finite()
}

/// Evaluates `f` on every grid point and brackets the best one with its
/// neighbours. Non-finite values rank below every finite value; ties go to
/// the smaller `λ`. Returns the bracket and every evaluation in grid order.
pub fn grid_bracket<T, F>(f: &mut F, grid: &[T], direction: Direction) -> Result<(Bracket<T>, Evaluations<T>)>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if grid.len() < 3 {
        return Err(Error::argument("the tuning grid needs at least 3 points"));
    }
    let mut evals = Vec::with_capacity(grid.len());
    for &x in grid {
        let v = f(x).map_err(|e| tuning_error(e.to_string(), &evals))?;
        evals.push((x, v));
    }
    let mut best: Option<usize> = None;
    for (i, &(_, v)) in evals.iter().enumerate() {
        if !comparable(v) {
            continue;
        }
        if best.is_none_or(|b| direction.better(v, evals[b].1)) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(tuning_error(
            "objective is non-finite at every grid point".into(),
            &evals,
        ));
    };
    let last = evals.len() - 1;
    let bracket = if best == 0 {
        Bracket {
            lo: evals[0],
            mid: evals[0],
            hi: evals[1],
            kind: BracketKind::LeftEndpoint,
        }
    } else if best == last {
        Bracket {
            lo: evals[last - 1],
            mid: evals[last],
            hi: evals[last],
            kind: BracketKind::RightEndpoint,
        }
    } else {
        Bracket {
            lo: evals[best - 1],
            mid: evals[best],
            hi: evals[best + 1],
            kind: BracketKind::Interior,
        }
    };
    Ok((bracket, evals))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrentResult<T> {
    pub x: T,
    pub value: T,
    /// Evaluations made by the refinement, in call order.
    pub evaluations: Vec<(T, T)>,
}

/// Brent minimization inside `bracket`.
///
/// If the middle point is not strictly better than both ends it is returned
/// as is, without further evaluations. Stops once every point of the
/// remaining interval lies within `tolerance / 2` of the best point, or
/// after `max_evals` evaluations.
pub fn brent_minimize<T, F>(f: &mut F, bracket: Bracket<T>, tolerance: T, max_evals: usize) -> Result<BrentResult<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let (mut x, mut fx) = bracket.mid;
    let mut evaluations = Vec::new();
    if !bracket.is_valid_minimum() {
        return Ok(BrentResult {
            x,
            value: fx,
            evaluations,
        });
    }
    let half = T::lit(0.5);
    let golden = T::lit(GOLDEN);
    let eps = T::epsilon();
    let (mut a, mut b) = (bracket.lo.0, bracket.hi.0);
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d = T::zero();
    let mut e = T::zero();

    while evaluations.len() < max_evals {
        let xm = half * (a + b);
        let tol1 = tolerance / T::lit(4.0) + eps * x.abs();
        let tol2 = tol1 + tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = (q - r) + (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if !(p.abs() >= (half * q * e_prev).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        evaluations.push((u, fu));
        if !fu.is_finite() {
            return Err(Error::Tuning {
                message: format!("non-finite objective value at lambda {u}"),
                trace: evaluations.iter().map(|&(x, v)| (x.as_f64(), v.as_f64())).collect(),
            });
        }
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(BrentResult {
        x,
        value: fx,
        evaluations,
    })
}

/// `(λ, objective)` pairs.
pub type Evaluations<T> = Vec<(T, T)>;

/// Outcome of a one-dimensional search: the best scale and every evaluation in `λ` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSearch<T> {
    pub lambda: T,
    pub value: T,
    pub evaluations: Vec<(T, T)>,
}

/// Grid scan followed by Brent refinement of `f` in the given direction.
pub fn search_scale<T, F>(mut f: F, direction: Direction, config: &TuneConfig<T>) -> Result<ScaleSearch<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    config.validate()?;
    let (bracket, mut evaluations) = grid_bracket(&mut f, &config.grid, direction)?;
    let refined = match direction {
        Direction::Minimize => brent_minimize(&mut f, bracket, config.tolerance, config.max_refine_evals),
        Direction::Maximize => {
            let mut neg = |x: T| f(x).map(|v| -v);
            brent_minimize(&mut neg, bracket.negated(), config.tolerance, config.max_refine_evals).map(|mut r| {
                r.value = -r.value;
                r.evaluations.iter_mut().for_each(|p| p.1 = -p.1);
                r
            })
        }
    };
    let refined = refined.map_err(|err| match err {
        Error::Tuning { message, mut trace } => {
            trace.extend(evaluations.iter().map(|&(x, v)| (x.as_f64(), v.as_f64())));
            trace.sort_by(|a, b| a.0.total_cmp(&b.0));
            Error::Tuning { message, trace }
        }
        other => tuning_error(other.to_string(), &evaluations),
    })?;
    evaluations.extend(refined.evaluations);
    evaluations.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite lambdas"));

    let mut best: Option<(T, T)> = None;
    for &(x, v) in &evaluations {
        if comparable(v) && best.is_none_or(|(_, bv)| direction.better(v, bv)) {
            best = Some((x, v));
        }
    }
    let (lambda, value) = best.expect("grid phase found a finite value");
    Ok(ScaleSearch {
        lambda,
        value,
        evaluations,
    })
}

fn tuning_error<T: Real>(message: String, evals: &[(T, T)]) -> Error {
    Error::Tuning {
        message,
        trace: evals.iter().map(|&(x, v)| (x.as_f64(), v.as_f64())).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult<T> {
    pub lambda_star: T,
    pub objective_value: T,
    /// Every `(λ, objective)` evaluated, in `λ` order.
    pub evaluations: Vec<(T, T)>,
    pub strategy: StrategyKind,
    pub objective: ObjectiveKind,
}

impl<T: Real> TuneResult<T> {
    /// Objective value at `λ = 0`, which the grid always contains.
    pub fn baseline_value(&self) -> Option<T> {
        self.evaluations.iter().find(|&&(x, _)| x == T::zero()).map(|&(_, v)| v)
    }
}

/// Finds the scale whose fully retrained model scores best on `dev`.
///
/// Every evaluation retrains from scratch on `train_corpus` with
/// `train_config`'s iteration count and epsilon; its strategy and scale are
/// replaced by `strategy` and the candidate `λ`.
pub fn tune<T: Real>(
    train_corpus: &ParallelCorpus,
    dev: &DevSet,
    strategy: Arc<AddingStrategy<T>>,
    objective: ObjectiveKind,
    tune_config: &TuneConfig<T>,
    train_config: &TrainConfig<T>,
) -> Result<TuneResult<T>> {
    if objective.needs_annotation() && !dev.is_annotated() {
        return Err(Error::argument(format!(
            "objective {objective} needs annotated development pairs"
        )));
    }
    let kind = strategy.kind();
    let f = |lambda: T| -> Result<T> {
        let config = TrainConfig {
            lambda,
            strategy: Some(Arc::clone(&strategy)),
            ..train_config.clone()
        };
        let model = train(train_corpus, &config)?;
        evaluate_objective(objective, dev, &model.table)
    };
    let search = search_scale(f, objective.direction(), tune_config)?;
    Ok(TuneResult {
        lambda_star: search.lambda,
        objective_value: search.value,
        evaluations: search.evaluations,
        strategy: kind,
        objective,
    })
}
