use fracaffine::field::{FieldGrid, OUState};
use fracaffine::measure::{discretize, GridConfig, GridMeasure, MeasureSpec};
use fracaffine::rates::{cap_floor, rate_value, zcb_price, CapKind, CapSchedule, RateKind, RateModel};

fn model(kind: RateKind, u: f64) -> RateModel {
    let grid = FieldGrid::new(&GridMeasure::single(1.0, 1.0).unwrap(), None);
    let state = OUState::zero(&grid);
    RateModel::new(kind, 0.02, grid, vec![u], vec![0.0], state).unwrap()
}

#[test]
fn flat_curve_discounts_at_the_level() {
    for kind in [RateKind::ShortRate, RateKind::BankAccount] {
        let m = model(kind, 0.0);
        let p = zcb_price(&m, 5.0).unwrap();
        assert!((p - (-0.1f64).exp()).abs() < 1e-15);
        assert!((p - 0.904837).abs() < 5e-7);
    }
}

/// One atom at speed 1 with unit weight: `log P = -ℓT + ½u²∫_0^T (1 - e^{-s})² ds`.
#[test]
fn single_atom_short_rate_bond() {
    let m = model(RateKind::ShortRate, 0.5);
    let t: f64 = 3.0;
    let integral = t - 2.0 * (1.0 - (-t).exp()) + 0.5 * (1.0 - (-2.0 * t).exp());
    let exact = (-0.02 * t + 0.125 * integral).exp();
    assert!((zcb_price(&m, t).unwrap() - exact).abs() < 1e-13);
}

#[test]
fn bank_account_has_no_short_rate() {
    assert!(rate_value(&model(RateKind::BankAccount, 0.5)).is_err());
    assert!((rate_value(&model(RateKind::ShortRate, 0.5)).unwrap() - 0.02).abs() < 1e-15);
}

#[test]
fn cap_legs_sum_to_total() {
    let m = model(RateKind::ShortRate, 0.5);
    let sched = CapSchedule {
        t0: 0.5,
        delta: 0.5,
        n: 6,
        kappa: 0.03,
    };
    for kind in [CapKind::Cap, CapKind::Floor] {
        let price = cap_floor(&m, &sched, kind).unwrap();
        assert_eq!(price.legs.len(), 6);
        assert!((price.legs.iter().sum::<f64>() - price.total).abs() < 1e-15);
        assert!(price.legs.iter().all(|&l| l >= 0.0));
    }
}

#[test]
fn bad_schedules_are_rejected() {
    let m = model(RateKind::ShortRate, 0.5);
    let sched = CapSchedule {
        t0: 0.5,
        delta: 0.0,
        n: 2,
        kappa: 0.03,
    };
    assert!(cap_floor(&m, &sched, CapKind::Cap).is_err());
}

#[test]
fn integrability_warnings() {
    let gm = discretize(&MeasureSpec::fbm_mu(0.3), &GridConfig::new(1e-2, 1e2, 8)).unwrap();
    let grid = FieldGrid::new(&gm, None);
    let n = grid.len();
    let build = |spec: &MeasureSpec| {
        RateModel::new(
            RateKind::BankAccount,
            0.0,
            grid.clone(),
            vec![0.1; n],
            vec![0.0; n],
            OUState::zero(&grid),
        )
        .unwrap()
        .with_measure_specs(Some(spec), None)
        .unwrap()
    };
    assert!(build(&MeasureSpec::fbm_mu(0.3)).warnings.is_empty());
    let heavy = build(&MeasureSpec::power_law(1.0, 1.2));
    assert!(!heavy.warnings.is_empty());
}
