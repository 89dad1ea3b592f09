use stickyflow::chain::sample_sticky_bm;
use stickyflow::halfplane::{occupation_probability, simulate_halfplane, time_change, HalfPlaneSpec};
use stickyflow::path::JumpPath;
use stickyflow::rng::{self, Domain};
use stickyflow::verify::{mc_run, replicate, Moments};

#[test]
fn time_change_keeps_the_trace() {
    let spec = HalfPlaneSpec::new(1.0, 1.5, (0.0, 0.1), 400.0).unwrap();
    let mut rng = rng::stream(9, Domain::Replica, 0);
    let unit = simulate_halfplane(&spec, 1.0, &mut rng).unwrap();
    for a0 in [0.25, 1.0, 4.0] {
        let changed = time_change(&unit, a0).unwrap();
        assert!(changed.states().eq(unit.states()));
        let expected: f64 = unit.segments().map(|(s, e, x)| if x[1] == 0.0 { (e - s) / a0 } else { e - s }).sum();
        assert!((changed.horizon() - expected).abs() < 1e-12);
    }
}

#[test]
fn time_change_with_unit_speed_is_identity() {
    let mut path = JumpPath::new(0.0, &[0.0, 0.0], 2.0);
    path.push(0.5, &[0.1, 0.0]);
    path.push(1.5, &[0.1, 0.2]);
    let same = time_change(&path, 1.0).unwrap();
    assert_eq!(same, path);
}

#[test]
fn tangential_and_normal_parts_are_uncorrelated() {
    let spec = HalfPlaneSpec::new(1.0, 1.0, (0.0, 0.2), 400.0).unwrap();
    let rows: Vec<(f64, f64)> = replicate(8_000, 4, 1, |_, rng| {
        let path = simulate_halfplane(&spec, 0.5, rng)?;
        let x = path.final_state();
        Ok((x[0], x[1]))
    })
    .unwrap()
    .into_iter()
    .map(|r| r.unwrap())
    .collect();
    let xi = Moments::from_slice(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let eta = Moments::from_slice(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let cross = Moments::from_slice(&rows.iter().map(|r| (r.0 - xi.mean) * (r.1 - eta.mean)).collect::<Vec<_>>());
    let corr = cross.mean / (xi.variance() * eta.variance()).sqrt();
    assert!(corr.abs() < 4.0 / (rows.len() as f64).sqrt(), "correlation {corr}");
    assert!((xi.variance() - 0.5).abs() < 0.05, "variance {}", xi.variance());
}

#[test]
fn stronger_splitting_leaves_zero_sooner() {
    let exact: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&th| occupation_probability(th, 0.5).unwrap()).collect();
    assert!(exact.windows(2).all(|w| w[1] < w[0]));
    let at_zero = |theta0: f64, seed: u64| {
        mc_run(5_000, seed, 1, |rng| {
            Ok(f64::from(u8::from(sample_sticky_bm(theta0, 0.0, 0.5, 400.0, rng)?.final_state()[0] == 0.0)))
        })
        .unwrap()
    };
    let (low, high) = (at_zero(0.5, 1), at_zero(2.0, 2));
    assert!(low.mean - high.mean > 4.0 * (low.stderr.hypot(high.stderr)), "{} vs {}", low.mean, high.mean);
}
