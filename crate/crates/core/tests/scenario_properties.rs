use fdjs_core::{sample_trajectory, Propagation, PuActivity, PuState, RngStream};
use proptest::prelude::*;

#[test]
fn long_run_on_fraction_matches_payload() {
    for (payload, cycle) in [(0.5, 1.0), (0.4, 1.0), (0.4, 0.1)] {
        let a = PuActivity::from_cycle(cycle, payload).unwrap();
        // 10^4 cycles
        let t = sample_trajectory(&a, 1e4 * cycle, &RngStream::new(5, 0)).unwrap();
        let frac = t.total_on_s() / t.duration_s();
        assert!((frac - payload).abs() < 0.01, "{payload}: {frac}");
    }
}

#[test]
fn mean_dwell_times_match() {
    let a = PuActivity::from_cycle(2.0, 0.4).unwrap();
    let t = sample_trajectory(&a, 4e4, &RngStream::new(6, 0)).unwrap();
    // drop the truncated first and last intervals
    let inner = &t.intervals[1..t.intervals.len() - 1];
    let mean = |s: PuState| {
        let v: Vec<f64> = inner.iter().filter(|iv| iv.state == s).map(|iv| iv.len()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!((mean(PuState::On) / a.mean_on_s - 1.0).abs() < 0.02);
    assert!((mean(PuState::Off) / a.mean_off_s - 1.0).abs() < 0.02);
}

proptest! {
    #[test]
    fn trajectories_alternate_and_tile(
        on in 0.001f64..5.0,
        off in 0.001f64..5.0,
        duration in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        let t = sample_trajectory(&PuActivity::new(on, off).unwrap(), duration, &RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(t.intervals[0].start_s, 0.0);
        prop_assert_eq!(t.duration_s(), duration);
        for w in t.intervals.windows(2) {
            prop_assert_eq!(w[0].end_s, w[1].start_s);
            prop_assert!(w[0].state != w[1].state);
        }
    }

    #[test]
    fn path_loss_is_linear_in_log_distance(d in 1.0f64..1e7, factor in 1.001f64..100.0) {
        let p = Propagation::default();
        let drop = p.received_power_dbm(d).unwrap() - p.received_power_dbm(d * factor).unwrap();
        prop_assert!((drop - 10.0 * p.beta * factor.log10()).abs() < 1e-9);
        prop_assert!(p.alpha_s_at(d * factor).unwrap() < p.alpha_s_at(d).unwrap());
    }
}
