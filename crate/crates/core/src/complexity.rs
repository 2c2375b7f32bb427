//! Instance-dependent complexity terms.
//!
//! - [`lai_robbins_constant`]: `C(mu) = sum_a (mu* - mu_a) / d(mu_a, mu*)`,
//!   the asymptotic minimal regret per `log T`.
//! - [`optimal_weights`]: the characteristic time `T*(mu)` and the optimal
//!   proportions `w*(mu)`, the value and maximizer of
//!
//!   ```text
//!   1/T* = sup_{w in simplex} min_{a != 1} [ w_1 d(mu_1, m_a) + w_a d(mu_a, m_a) ],
//!   m_a = (w_1 mu_1 + w_a mu_a) / (w_1 + w_a)
//!   ```
//!
//! The solver follows the equalization argument: at the optimum the `K - 1`
//! terms of the min coincide. With `g_a(x) = d(mu_1, m) + x d(mu_a, m)`,
//! `m = (mu_1 + x mu_a) / (1 + x)`, and `x_a = g_a^{-1}`, the common value
//! `y*` solves `F(y) = sum_{a >= 2} d(mu_1, m_a) / d(mu_a, m_a) = 1` where
//! `m_a` is evaluated at `x_a(y)`. Then `w*_a` is proportional to `x_a(y*)`
//! with `x_1 = 1`. Both scalar equations are solved by bracketing.
//!
//! Means are sorted internally (best first) and results are reported in the
//! caller's arm order.

use serde::{Deserialize, Serialize};

use crate::engine::{argmax, BanditInstance};
use crate::exp_family::ArmFamily;
use crate::roots::{bisect, MAX_ITERATIONS};
use crate::{Error, Result};

/// Default tolerance on `|F(y*) - 1|`.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

/// Largest instance accepted by [`oracle_sup_inf`].
pub const ORACLE_MAX_ARMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTime {
    pub t_star: f64,
    /// Optimal proportions, in the caller's arm order.
    pub w_star: Vec<f64>,
    /// Common value of the pairwise terms at the optimum, scaled by `1/w*_1`.
    pub y_star: f64,
}

pub fn lai_robbins_constant(instance: &BanditInstance) -> f64 {
    let family = instance.family();
    let best = instance.best_mean();
    instance
        .means()
        .iter()
        .filter(|&&m| m < best)
        .map(|&m| (best - m) / family.kl(m, best))
        .sum()
}

/// `w_best d(mu_best, m) + w_a d(mu_a, m)` with `m` the weighted mean: the
/// cheapest way, at sampling proportions `(w_best, w_a)`, to move to an
/// instance in which arm `a` beats the best arm.
pub fn pairwise_transport(
    family: ArmFamily,
    w_best: f64,
    w_a: f64,
    mu_best: f64,
    mu_a: f64,
) -> f64 {
    let total = w_best + w_a;
    if total <= 0.0 {
        return 0.0;
    }
    let m = (w_best * mu_best + w_a * mu_a) / total;
    let mut value = 0.0;
    if w_best > 0.0 {
        value += w_best * family.kl(mu_best, m);
    }
    if w_a > 0.0 {
        value += w_a * family.kl(mu_a, m);
    }
    value
}

/// Closed-form `inf_{lambda in Alt(mu)} sum_a w_a d(mu_a, lambda_a)`: the
/// minimum of [`pairwise_transport`] over challengers of the best arm.
pub fn alt_inf(family: ArmFamily, means: &[f64], weights: &[f64]) -> f64 {
    let best = argmax(means);
    (0..means.len())
        .filter(|&a| a != best)
        .map(|a| pairwise_transport(family, weights[best], weights[a], means[best], means[a]))
        .fold(f64::INFINITY, f64::min)
}

fn check_pair(family: ArmFamily, mu1: f64, mua: f64) -> Result<()> {
    for v in [mu1, mua] {
        if !family.in_closure(v) {
            return Err(Error::InvalidArgument(format!(
                "mean {v} outside the {} domain {}",
                family.name(),
                family.domain_str()
            )));
        }
    }
    if mu1 <= mua {
        return Err(Error::InvalidArgument(format!(
            "g_a needs mu_1 > mu_a, got {mu1} <= {mua}"
        )));
    }
    Ok(())
}

/// `g_a(x)` and its derivative `d(mu_a, m(x))`.
fn g_with_slope(family: ArmFamily, mu1: f64, mua: f64, x: f64) -> (f64, f64) {
    let m = (mu1 + x * mua) / (1.0 + x);
    let slope = family.kl(mua, m);
    // the slope is infinite at x = 0 when mu_1 sits on the domain boundary
    let transport = if x > 0.0 { x * slope } else { 0.0 };
    (family.kl(mu1, m) + transport, slope)
}

pub fn g_eval(family: ArmFamily, mu1: f64, mua: f64, x: f64) -> Result<f64> {
    check_pair(family, mu1, mua)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "x must be finite and >= 0, got {x}"
        )));
    }
    Ok(g_with_slope(family, mu1, mua, x).0)
}

/// Inverse of `g_a` on `[0, d(mu_1, mu_a))`.
pub fn x_of_y(family: ArmFamily, mu1: f64, mua: f64, y: f64) -> Result<f64> {
    check_pair(family, mu1, mua)?;
    if y.is_nan() || y < 0.0 {
        return Err(Error::InvalidArgument(format!("y must be >= 0, got {y}")));
    }
    let sup = family.kl(mu1, mua);
    if y >= sup {
        return Err(Error::OutOfRange(format!(
            "y = {y} is not below d(mu_1, mu_a) = {sup}"
        )));
    }
    solve_x(family, mu1, mua, y)
}

/// Safeguarded Newton inside a geometrically grown bisection bracket. `g_a`
/// is concave and increasing, so Newton iterates started left of the root
/// stay left of it; the bracket catches rounding trouble.
fn solve_x(family: ArmFamily, mu1: f64, mua: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g_with_slope(family, mu1, mua, hi).0 < y {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::OutOfRange(format!("no bracket for x_a({y})")));
        }
    }
    let mut x = lo;
    for _ in 0..MAX_ITERATIONS {
        let (gx, slope) = g_with_slope(family, mu1, mua, x);
        let residual = gx - y;
        if residual.abs() <= 1e-14 * y.max(1.0) {
            return Ok(x);
        }
        if residual < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let newton = x - residual / slope;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// Arms sorted by decreasing mean, with the permutation kept.
struct Sorted {
    order: Vec<usize>,
    means: Vec<f64>,
}

fn sort_unique_best(family: ArmFamily, means: &[f64]) -> Result<Sorted> {
    if means.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 arms".into()));
    }
    if let Some(i) = means.iter().position(|&m| !family.in_closure(m)) {
        return Err(Error::Domain {
            arm: i + 1,
            value: means[i],
            family: family.name(),
            domain: family.domain_str(),
        });
    }
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| means[i]).collect();
    if sorted[0] <= sorted[1] {
        return Err(Error::DegenerateInstance(format!(
            "arms {} and {} share the largest mean {}",
            order[0] + 1,
            order[1] + 1,
            sorted[0]
        )));
    }
    Ok(Sorted {
        order,
        means: sorted,
    })
}

/// `F(y)` on sorted means, along with the `x_a(y)` it used (index 0 unused).
fn f_sorted(family: ArmFamily, means: &[f64], y: f64, xs: &mut [f64]) -> Result<f64> {
    let mu1 = means[0];
    let mut total = 0.0;
    for a in 1..means.len() {
        let mua = means[a];
        let x = solve_x(family, mu1, mua, y)?;
        xs[a] = x;
        let m = (mu1 + x * mua) / (1.0 + x);
        let num = family.kl(mu1, m);
        if num > 0.0 {
            total += num / family.kl(mua, m);
        }
    }
    Ok(total)
}

/// `F_mu(y)`: continuous, increasing on `[0, d(mu_1, mu_2))`, zero at zero.
pub fn f_eval(instance: &BanditInstance, y: f64) -> Result<f64> {
    let family = instance.family();
    let sorted = sort_unique_best(family, instance.means())?;
    let d12 = family.kl(sorted.means[0], sorted.means[1]);
    if y.is_nan() || y < 0.0 {
        return Err(Error::InvalidArgument(format!("y must be >= 0, got {y}")));
    }
    if y >= d12 {
        return Err(Error::OutOfRange(format!(
            "y = {y} is not below d(mu_1, mu_2) = {d12}"
        )));
    }
    let mut xs = vec![0.0; sorted.means.len()];
    f_sorted(family, &sorted.means, y, &mut xs)
}

pub fn optimal_weights(instance: &BanditInstance, tol: f64) -> Result<CharacteristicTime> {
    optimal_weights_from_means(instance.family(), instance.means(), tol)
}

/// [`optimal_weights`] for means in the closure of the domain, e.g. plug-in
/// estimates sitting on the Bernoulli boundary.
pub fn optimal_weights_from_means(
    family: ArmFamily,
    means: &[f64],
    tol: f64,
) -> Result<CharacteristicTime> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let sorted = sort_unique_best(family, means)?;
    let k = sorted.means.len();
    let d12 = family.kl(sorted.means[0], sorted.means[1]);
    if !d12.is_finite() {
        return Err(Error::DegenerateInstance(format!(
            "d(mu_1, mu_2) is infinite for means {:?}",
            sorted.means
        )));
    }

    let mut xs = vec![0.0; k];
    let y_max = (1.0 - 1e-9) * d12;
    if f_sorted(family, &sorted.means, y_max, &mut xs)? < 1.0 {
        return Err(Error::Internal(format!(
            "F does not reach 1 below d(mu_1, mu_2) for means {:?}",
            sorted.means
        )));
    }

    let failure = std::cell::RefCell::new(None);
    let last = std::cell::Cell::new((f64::NAN, f64::NAN));
    let (lo, hi) = bisect(
        0.0,
        y_max,
        |y| match f_sorted(family, &sorted.means, y, &mut xs) {
            Ok(f) => {
                last.set((y, f));
                f > 1.0
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                true
            }
        },
        |_, _| (last.get().1 - 1.0).abs() <= tol || failure.borrow().is_some(),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let last = last.get();
    let y_star = if (last.1 - 1.0).abs() <= tol {
        last.0
    } else {
        0.5 * (lo + hi)
    };
    // refresh xs at y_star
    let _ = f_sorted(family, &sorted.means, y_star, &mut xs)?;
    xs[0] = 1.0;

    let total: f64 = xs.iter().sum();
    let w_sorted: Vec<f64> = xs.iter().map(|x| x / total).collect();
    let mean_value = (1..k)
        .map(|a| {
            pairwise_transport(
                family,
                w_sorted[0],
                w_sorted[a],
                sorted.means[0],
                sorted.means[a],
            )
        })
        .sum::<f64>()
        / (k - 1) as f64;

    let mut w_star = vec![0.0; k];
    for (i, &arm) in sorted.order.iter().enumerate() {
        w_star[arm] = w_sorted[i];
    }
    Ok(CharacteristicTime {
        t_star: 1.0 / mean_value,
        w_star,
        y_star,
    })
}

/// Brute-force `sup_w inf_{Alt}` on a regular simplex grid of step
/// `grid_resolution`, using the closed-form inner minimization. Returns
/// `(1 / best value, best grid point)`. Test oracle, `K <= 4`.
pub fn oracle_sup_inf(instance: &BanditInstance, grid_resolution: f64) -> Result<(f64, Vec<f64>)> {
    let k = instance.num_arms();
    if k > ORACLE_MAX_ARMS {
        return Err(Error::Unsupported(format!(
            "grid oracle supports at most {ORACLE_MAX_ARMS} arms, got {k}"
        )));
    }
    if !(grid_resolution > 0.0 && grid_resolution <= 0.01) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must lie in (0, 0.01], got {grid_resolution}"
        )));
    }
    if !instance.has_unique_best() {
        return Err(Error::DegenerateInstance("tied best arms".into()));
    }
    let family = instance.family();
    let means = instance.means();
    let best = instance.best_arm();
    let steps = (1.0 / grid_resolution).round() as usize;
    let step = 1.0 / steps as f64;

    let mut best_value = f64::NEG_INFINITY;
    let mut best_w = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut w = vec![0.0; k];
    // enumerate compositions of `steps` into k parts
    fn visit(pos: usize, left: usize, counts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            visit(pos + 1, left - c, counts, f);
        }
    }
    visit(0, steps, &mut counts, &mut |c| {
        if c[best] == 0 {
            return;
        }
        for (wi, &ci) in w.iter_mut().zip(c) {
            *wi = ci as f64 * step;
        }
        let mut value = f64::INFINITY;
        for a in 0..k {
            if a != best {
                value = value.min(pairwise_transport(
                    family,
                    w[best],
                    w[a],
                    means[best],
                    means[a],
                ));
                if value <= best_value {
                    return;
                }
            }
        }
        if value > best_value {
            best_value = value;
            best_w.copy_from_slice(&w);
        }
    });
    if !(best_value > 0.0) {
        return Err(Error::Internal(
            "grid oracle found no positive objective".into(),
        ));
    }
    Ok((1.0 / best_value, best_w))
}

/// Bounds within a factor 2 of `T*` for Gaussian arms:
/// `L = 2 sigma2 / D_2^2 + sum_{a>=2} 2 sigma2 / D_a^2`, `U = 2 L`.
pub fn gaussian_t_star_bounds(instance: &BanditInstance) -> Result<(f64, f64)> {
    let ArmFamily::Gaussian { variance } = instance.family() else {
        return Err(Error::Unsupported(format!(
            "gaussian bounds requested for the {} family",
            instance.family().name()
        )));
    };
    let sorted = sort_unique_best(instance.family(), instance.means())?;
    let mu1 = sorted.means[0];
    let term = |mu: f64| 2.0 * variance / ((mu1 - mu) * (mu1 - mu));
    let lower = term(sorted.means[1]) + sorted.means[1..].iter().map(|&m| term(m)).sum::<f64>();
    Ok((lower, 2.0 * lower))
}

/// Checks `sum_a E[N_a] d(mu_a, lambda_a) >= kl(p, q)` up to `1e-9` slack.
pub fn transportation_check(divergence_terms: &[f64], p: f64, q: f64) -> bool {
    if divergence_terms.iter().any(|x| x.is_nan() || *x < 0.0)
        || !(0.0..=1.0).contains(&p)
        || !(0.0..=1.0).contains(&q)
    {
        return false;
    }
    let lhs: f64 = divergence_terms.iter().sum();
    let rhs = ArmFamily::Bernoulli.kl(p, q);
    if rhs.is_infinite() {
        return lhs.is_infinite();
    }
    lhs - rhs >= -1e-9
}
