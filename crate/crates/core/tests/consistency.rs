use stickyflow::chain::{rescale, sample_continuum_family, simulate_chain, ChainSpec};
use stickyflow::params::{p_from_mu, theta_from_nu, AtomicMeasure};
use stickyflow::rng::{self, Domain};
use stickyflow::verify::{
    lattice_sampler, martingale_drift_check, mc_run, replicate, two_sample_chi_square, MartingaleForm, Moments,
};

fn skewed() -> AtomicMeasure {
    AtomicMeasure::new(vec![(0.25, 1.0 / 3.0), (0.75, 2.0 / 3.0)]).unwrap()
}

#[test]
fn two_coordinates_of_three_point_motion_form_the_two_point_motion() {
    let p = p_from_mu(&skewed(), 3).unwrap();
    let three = ChainSpec::new(p.clone(), vec![0, 1, 0], 3.0).unwrap();
    let two = ChainSpec::new(p, vec![0, 0], 3.0).unwrap();
    let projected: Vec<Vec<i64>> = replicate(20_000, 11, 1, |_, rng| {
        let y = simulate_chain(&three, rng)?;
        Ok(vec![y.final_state()[0], y.final_state()[2]])
    })
    .unwrap()
    .into_iter()
    .map(|r| r.unwrap())
    .collect();
    let direct: Vec<Vec<i64>> = replicate(20_000, 12, 1, |_, rng| Ok(simulate_chain(&two, rng)?.final_state().to_vec()))
        .unwrap()
        .into_iter()
        .map(|r| r.unwrap())
        .collect();
    let (_, _, p_value, _) = two_sample_chi_square(&projected, &direct).unwrap();
    assert!(p_value > 1e-3, "p = {p_value}");
}

#[test]
fn rescaled_coordinate_has_unit_diffusivity() {
    let theta = theta_from_nu(&AtomicMeasure::dirac(0.5).unwrap(), 0.0, 2).unwrap();
    let finals: Vec<f64> = replicate(20_000, 3, 1, |_, rng| {
        let x = sample_continuum_family(&theta, &[0.0, 0.0], 1.0, 400.0, rng)?;
        Ok(x.final_state()[0])
    })
    .unwrap()
    .into_iter()
    .map(|r| r.unwrap())
    .collect();
    let m = Moments::from_slice(&finals);
    assert!(m.mean.abs() < 4.0 * m.stderr(), "mean {}", m.mean);
    assert!((m.variance() - 1.0).abs() < 0.05, "variance {}", m.variance());
}

#[test]
fn lattice_product_form_has_constant_mean() {
    let p = p_from_mu(&skewed(), 2).unwrap();
    let spec = ChainSpec::new(p.clone(), vec![0, 0], 2.0).unwrap();
    let report = martingale_drift_check(
        lattice_sampler(spec),
        MartingaleForm::lattice_product(&p, 0, 1),
        &[0.5, 1.0, 2.0],
        20_000,
        21,
        1,
    )
    .unwrap();
    assert!(report.pass, "{:?}", report.pairs);
}

#[test]
fn rescaling_divides_space_and_time() {
    let p = p_from_mu(&skewed(), 2).unwrap();
    let spec = ChainSpec::new(p, vec![0, 3], 50.0).unwrap();
    let mut rng = rng::stream(5, Domain::Replica, 0);
    let raw = simulate_chain(&spec, &mut rng).unwrap();
    let scaled = rescale(&raw, 25.0).unwrap();
    for t in [0.0, 0.3, 1.1, 2.0] {
        let a = raw.value_at(25.0 * t).unwrap();
        let b = scaled.value_at(t).unwrap();
        assert!((0..2).all(|i| (b[i] - a[i] as f64 / 5.0).abs() < 1e-12));
    }
}

#[test]
fn monte_carlo_is_reproducible_from_the_seed() {
    let theta = theta_from_nu(&AtomicMeasure::dirac(0.5).unwrap(), 0.0, 2).unwrap();
    let run = |par| {
        mc_run(500, 77, par, |rng| Ok(sample_continuum_family(&theta, &[0.0, 0.0], 0.5, 100.0, rng)?.final_state()[1]))
            .unwrap()
    };
    assert_eq!(run(1), run(3));
}
