use approx::assert_abs_diff_eq;
use banditlab::complexity::{
    alt_inf, g_eval, gaussian_t_star_bounds, optimal_weights, pairwise_transport,
    transportation_check, x_of_y, DEFAULT_SOLVER_TOL,
};
use banditlab::engine::{pseudo_regret, regret_curve, run_policy, BanditInstance, History};
use banditlab::exp_family::{dual_upper, PosteriorState};
use banditlab::policies::{klucb_exploration, IndexPolicy, PolicyConfig, PolicyKind};
use banditlab::track_and_stop::{
    chernoff_statistic, pairwise_glrt, run_track_and_stop, StoppingConfig,
};
use banditlab::{ArmFamily, Stream};
use proptest::prelude::*;

fn kl_bern(x: f64, y: f64) -> f64 {
    let t = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    t(x, y) + t(1.0 - x, 1.0 - y)
}

fn family() -> impl Strategy<Value = ArmFamily> {
    prop_oneof![
        Just(ArmFamily::Bernoulli),
        (0.1f64..4.0).prop_map(|v| ArmFamily::Gaussian { variance: v }),
        Just(ArmFamily::Poisson),
        Just(ArmFamily::Exponential),
    ]
}

/// A mean of `family` drawn from a fraction `u` of a bounded window.
fn mean_of(family: ArmFamily, u: f64) -> f64 {
    match family {
        ArmFamily::Bernoulli => 0.01 + 0.98 * u,
        ArmFamily::Gaussian { .. } => -3.0 + 6.0 * u,
        _ => 0.05 + 5.0 * u,
    }
}

/// Distinct Bernoulli means, at least 0.02 apart.
fn spread_means(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..0.95, k).prop_filter("means too close", |m| {
        (0..m.len()).all(|i| (0..i).all(|j| (m[i] - m[j]).abs() >= 0.02))
    })
}

proptest! {
    #[test]
    fn divergence_is_nonnegative_and_grows_away_from_mu(
        f in family(), u in 0.0f64..1.0, v in 0.0f64..1.0, s in 0.0f64..1.0,
    ) {
        let (mu, lam) = (mean_of(f, u), mean_of(f, v));
        let d = f.divergence(mu, lam).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(f.divergence(mu, mu).unwrap().abs() <= 1e-12);
        let further = mu + (lam - mu) * (1.0 + s * 0.5);
        if f.contains(further) {
            prop_assert!(f.divergence(mu, further).unwrap() >= d - 1e-12);
        }
    }

    #[test]
    fn bernoulli_pinsker(p in 0.0f64..=1.0, q in 0.001f64..0.999) {
        let d = ArmFamily::Bernoulli.divergence(p.clamp(1e-9, 1.0 - 1e-9), q).unwrap();
        prop_assert!(d >= 2.0 * (p.clamp(1e-9, 1.0 - 1e-9) - q).powi(2) - 1e-12);
    }

    #[test]
    fn dual_upper_matches_level(f in family(), u in 0.0f64..1.0, n in 1u64..2000, level in 0.001f64..3.0) {
        let mu = match f {
            ArmFamily::Bernoulli => 0.05 + 0.9 * u,
            _ => mean_of(f, u),
        };
        prop_assume!(f != ArmFamily::Bernoulli || level / n as f64 <= 0.5);
        let q = dual_upper(f, mu, n, level).unwrap();
        prop_assert!(q >= mu);
        let gap = (n as f64 * f.divergence(mu, q).unwrap() - level).abs();
        prop_assert!(gap <= 1e-9, "gap {}", gap);
        prop_assert!(dual_upper(f, mu, n, level * 1.5).unwrap() >= q);
    }

    #[test]
    fn kl_index_is_below_hoeffding(mu in 0.0f64..=1.0, n in 1u64..500, t in 2u64..100_000) {
        let level = klucb_exploration(t);
        let kl = dual_upper(ArmFamily::Bernoulli, mu, n, level).unwrap();
        let hoeffding = mu + (2.0 * 0.25 * level / n as f64).sqrt();
        prop_assert!(kl <= hoeffding + 1e-12);
    }

    #[test]
    fn x_of_y_inverts_g(f in family(), u in 0.0f64..1.0, v in 0.0f64..1.0, frac in 0.0f64..0.999) {
        let (a, b) = (mean_of(f, u), mean_of(f, v));
        prop_assume!((a - b).abs() > 1e-3);
        let (mu1, mua) = if a > b { (a, b) } else { (b, a) };
        let y = frac * f.divergence(mu1, mua).unwrap();
        let x = x_of_y(f, mu1, mua, y).unwrap();
        prop_assert!(x >= 0.0);
        let back = g_eval(f, mu1, mua, x).unwrap();
        prop_assert!((back - y).abs() <= 1e-9 * y.max(1.0), "g(x(y)) = {} vs {}", back, y);
    }

    #[test]
    fn glrt_is_antisymmetric(counts in proptest::collection::vec(1u64..100, 2..5), seed in any::<u64>()) {
        let mut rng = Stream::new(seed);
        let sums: Vec<f64> = counts
            .iter()
            .map(|&n| (0..n).filter(|_| rand::Rng::random_bool(&mut rng, 0.5)).count() as f64)
            .collect();
        let h = History::from_parts(counts.clone(), sums).unwrap();
        for a in 0..counts.len() {
            for b in 0..counts.len() {
                if a != b {
                    let ab = pairwise_glrt(&h, ArmFamily::Bernoulli, a, b).unwrap();
                    let ba = pairwise_glrt(&h, ArmFamily::Bernoulli, b, a).unwrap();
                    prop_assert_eq!(ab, -ba);
                }
            }
        }
        let (z, _) = chernoff_statistic(&h, ArmFamily::Bernoulli).unwrap();
        prop_assert!(z >= 0.0);
    }

    #[test]
    fn equalizer_and_simplex(means in spread_means(4)) {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, means.clone()).unwrap();
        let ct = optimal_weights(&inst, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!((ct.w_star.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(ct.w_star.iter().all(|&w| w > 0.0));
        let best = inst.best_arm();
        let values: Vec<f64> = (0..4)
            .filter(|&a| a != best)
            .map(|a| pairwise_transport(ArmFamily::Bernoulli, ct.w_star[best], ct.w_star[a], means[best], means[a]))
            .collect();
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!((hi - lo) / hi <= 1e-6);
        prop_assert!((1.0 / alt_inf(ArmFamily::Bernoulli, &means, &ct.w_star) - ct.t_star).abs() <= 1e-6 * ct.t_star);
    }

    #[test]
    fn gaussian_t_star_is_bracketed(
        means in proptest::collection::vec(-2.0f64..2.0, 2..6), sigma2 in 0.2f64..3.0,
    ) {
        let mut sorted = means.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assume!(sorted[0] - sorted[1] >= 0.05);
        let inst = BanditInstance::new(ArmFamily::Gaussian { variance: sigma2 }, means.clone()).unwrap();
        let ct = optimal_weights(&inst, DEFAULT_SOLVER_TOL).unwrap();
        let (lo, hi) = gaussian_t_star_bounds(&inst).unwrap();
        prop_assert!(ct.t_star >= lo * (1.0 - 1e-9) && ct.t_star <= hi * (1.0 + 1e-9));
        let gap = sorted[0] - sorted[1];
        prop_assert!(ct.t_star <= 4.0 * sigma2 * means.len() as f64 / (gap * gap) * (1.0 + 1e-9));
    }

    #[test]
    fn two_arm_t_star_is_the_equalized_divergence(a in 0.05f64..0.95, b in 0.05f64..0.95) {
        prop_assume!((a - b).abs() >= 0.02);
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        // inf_m max(kl(hi, m), kl(lo, m)) is attained where the two are equal
        let (mut l, mut r) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if kl_bern(hi, m) > kl_bern(lo, m) { l = m } else { r = m }
        }
        let equalized = kl_bern(hi, 0.5 * (l + r));
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![a, b]).unwrap();
        let ct = optimal_weights(&inst, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!((ct.t_star * equalized - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn posterior_quantiles_are_monotone(s in 0u64..50, f in 0u64..50, p in 0.01f64..0.98) {
        let state = PosteriorState::new(ArmFamily::Bernoulli, s + f, s as f64).unwrap();
        let post = state.posterior().unwrap();
        let (q1, q2) = (post.quantile(p).unwrap(), post.quantile(p + 0.01).unwrap());
        prop_assert!(q1 <= q2 && (0.0..=1.0).contains(&q1));
    }

    #[test]
    fn regret_curve_ends_at_pseudo_regret(seed in any::<u64>(), kind in prop::sample::select(PolicyKind::ALL.to_vec())) {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, vec![0.3, 0.6, 0.5]).unwrap();
        let config = if kind == PolicyKind::Ucb1 { PolicyConfig::ucb1(0.25) } else { PolicyConfig::of_kind(kind) }.unwrap();
        let mut policy = IndexPolicy::new(config, inst.family()).unwrap();
        let rec = run_policy(&inst, &mut policy, 300, &mut Stream::new(seed)).unwrap();
        let curve = regret_curve(&inst, &rec.arm_sequence);
        prop_assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((curve[299] - pseudo_regret(&inst, &rec.final_history)).abs() <= 1e-9);
    }
}

/// Monte Carlo check of the transportation inequality for kl-UCB on
/// `mu = (0.6, 0.5)` against `lambda = (0.6, 0.7)` and the event
/// `{N_2(T) > T/2}`.
#[test]
fn transportation_inequality_holds_empirically() {
    let horizon = 200;
    let reps = 2000;
    let run = |means: Vec<f64>, offset: u64| {
        let inst = BanditInstance::new(ArmFamily::Bernoulli, means).unwrap();
        let mut hits = 0usize;
        let mut n2 = 0.0;
        for r in 0..reps {
            let mut policy = IndexPolicy::new(
                PolicyConfig::of_kind(PolicyKind::KlUcb).unwrap(),
                ArmFamily::Bernoulli,
            )
            .unwrap();
            let rec = run_policy(
                &inst,
                &mut policy,
                horizon,
                &mut Stream::for_replication(offset, r),
            )
            .unwrap();
            let c = rec.final_history.count(1);
            n2 += c as f64;
            if c > horizon / 2 {
                hits += 1;
            }
        }
        (hits as f64 / reps as f64, n2 / reps as f64)
    };
    let (p, n2) = run(vec![0.6, 0.5], 1);
    let (q, _) = run(vec![0.6, 0.7], 2);
    let terms = [0.0, n2 * kl_bern(0.5, 0.7)];
    assert!(q > 0.5 && p < 0.5, "p = {p}, q = {q}");
    assert!(
        transportation_check(&terms, p, q),
        "{terms:?} vs kl({p}, {q})"
    );
}

#[test]
fn track_and_stop_is_reproducible() {
    let inst = BanditInstance::new(ArmFamily::Poisson, vec![2.0, 1.0, 0.5]).unwrap();
    let config = StoppingConfig::default_for(ArmFamily::Poisson, 0.05).unwrap();
    let a = run_track_and_stop(&inst, &config, &mut Stream::for_replication(3, 4)).unwrap();
    let b = run_track_and_stop(&inst, &config, &mut Stream::for_replication(3, 4)).unwrap();
    assert_eq!(a, b);
    assert!(a.terminated);
    assert_eq!(a.z_sequence.len() as u64, a.tau - 2);
    assert_abs_diff_eq!(a.z_at(a.tau).unwrap(), *a.z_sequence.last().unwrap());
}
