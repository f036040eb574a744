use fdjs_core::{empirical_rates, DetectorParams, Hypothesis, Probability, RngStream, SampleModel, SamplingMode};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn roc_reproduces_parametric_curve_on_random_draws() {
    let mut rng = RngStream::new(2024, 0).generator();
    for _ in 0..50 {
        let n = rng.gen_range(10..5000);
        let d = DetectorParams::new(n, rng.gen_range(0.0..100.0), rng.gen_range(0.01..20.0)).unwrap();
        let rc = d.roc_constants();
        let centre = d.alpha_i + 1.0 + 0.5 * d.alpha_s;
        let spread = 6.0 * ((2.0 * d.alpha_i + 1.0) / f64::from(n)).sqrt() + d.alpha_s;
        for j in 0..50 {
            let gamma = centre - spread + 2.0 * spread * f64::from(j) / 49.0;
            let md = d.p_md_of_threshold(gamma).unwrap();
            if md.get() <= 1e-15 || md.get() >= 1.0 - 1e-15 {
                continue;
            }
            let fa = d.p_fa_of_threshold(gamma).unwrap().get();
            let via_roc = rc.p_fa_of_p_md(md).get();
            assert!((via_roc - fa).abs() <= 1e-9, "{d:?} gamma {gamma}: {via_roc} vs {fa}");
        }
    }
}

/// Empirical rates against the closed forms at 20 random operating points.
/// The closed forms are a large-N approximation, so a few points may fall
/// outside three standard deviations.
#[test]
fn empirical_rates_agree_at_most_points() {
    let mut rng = RngStream::new(99, 0).generator();
    let trials = 200_000u64;
    let mut agree = 0;
    let total = 20;
    for i in 0..total {
        let d = DetectorParams::new(
            rng.gen_range(500..5000),
            rng.gen_range(0.1..100.0),
            rng.gen_range(0.05..20.0),
        )
        .unwrap();
        let (hyp, gamma) = if i % 2 == 0 {
            let z = 1.281_551_565_544_600_5;
            (
                Hypothesis::H0,
                d.alpha_i + 1.0 + z * ((2.0 * d.alpha_i + 1.0) / f64::from(d.n_samples)).sqrt(),
            )
        } else {
            (
                Hypothesis::H1,
                d.threshold_for_p_md(Probability::new(0.1).unwrap()).unwrap(),
            )
        };
        let rate = empirical_rates(
            &SampleModel::from_params(&d, hyp),
            &d,
            gamma,
            trials,
            &RngStream::new(99, 1 + i),
            SamplingMode::ExactStatistic,
        )
        .unwrap()
        .get();
        let want = match hyp {
            Hypothesis::H0 => d.p_fa_of_threshold(gamma).unwrap().get(),
            Hypothesis::H1 => 1.0 - d.p_md_of_threshold(gamma).unwrap().get(),
        };
        if (rate - want).abs() <= 3.0 * (want * (1.0 - want) / trials as f64).sqrt() {
            agree += 1;
        }
    }
    assert!(agree * 100 >= 95 * total, "{agree}/{total}");
}

proptest! {
    #[test]
    fn p_fa_decreasing_and_p_md_increasing(
        n in 1u32..5000,
        ai in 0.0f64..100.0,
        as_ in 0.01f64..20.0,
        g in -5.0f64..50.0,
        dg in 1e-3f64..1.0,
    ) {
        let d = DetectorParams::new(n, ai, as_).unwrap();
        prop_assert!(d.p_fa_of_threshold(g).unwrap() >= d.p_fa_of_threshold(g + dg).unwrap());
        prop_assert!(d.p_md_of_threshold(g).unwrap() <= d.p_md_of_threshold(g + dg).unwrap());
    }

    /// A stronger primary signal lowers the ROC. This needs the gain in `k`
    /// to outweigh the wider H1 spread, which holds once N is large next to
    /// the self-interference ratio; with N = 10 and alpha_i near 100 it
    /// already fails at miss rates around 1e-3.
    #[test]
    fn roc_dominance(
        n in 500u32..3000,
        ai in 0.0f64..100.0,
        weak in 0.01f64..5.0,
        gain in 1.01f64..4.0,
        m in 0.01f64..0.999,
    ) {
        let lo = DetectorParams::new(n, ai, weak).unwrap().roc_constants();
        let hi = DetectorParams::new(n, ai, weak * gain).unwrap().roc_constants();
        let m = Probability::new(m).unwrap();
        prop_assert!(hi.p_fa_of_p_md(m) <= lo.p_fa_of_p_md(m));
    }

    #[test]
    fn roc_decreasing_in_p_md(
        n in 10u32..3000,
        ai in 0.0f64..100.0,
        as_ in 0.01f64..5.0,
        m in 0.001f64..0.99,
    ) {
        let rc = DetectorParams::new(n, ai, as_).unwrap().roc_constants();
        let a = rc.p_fa_of_p_md(Probability::new(m).unwrap());
        let b = rc.p_fa_of_p_md(Probability::new(m + 0.005).unwrap());
        prop_assert!(a >= b);
        let slope = rc.roc_derivative(Probability::new(m).unwrap());
        prop_assert!(slope <= 0.0);
        // the slope underflows together with the false-alarm tail
        if a.get() > 1e-250 {
            prop_assert!(slope < 0.0);
        }
    }
}
