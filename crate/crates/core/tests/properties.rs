use cam_core::mulholland::{decompose, DecomposeOptions};
use cam_core::pade::{poles_per_energy, read_poles_csv, write_poles_csv, Axis, PadePolicy, PoleRecord};
use cam_core::scatter::{load_smatrix_table, write_smatrix_csv, Kinematics, LoadOptions, TransitionLabel};
use cam_core::synth::{generate_table, Background, EnergyGrid, PoleModelSpec, PolePath, PoleTerm, ResiduePath};
use cam_core::trajectory::{read_trajectories_csv, track, write_trajectories_csv, TrackPolicy};
use cam_core::Complex64;
use proptest::prelude::*;

fn pole(re: f64, im: f64, slope: f64, residue: (f64, f64)) -> PoleTerm {
    PoleTerm {
        label: None,
        path: PolePath::Polynomial {
            e_ref: 40.0,
            coeffs: vec![Complex64::new(re, im), Complex64::new(slope, 0.0)],
        },
        residue: ResiduePath::constant(Complex64::new(residue.0, residue.1)),
        mirror: false,
    }
}

/// Two parallel poles `spacing` apart in Re λ.
fn spec(re: f64, im: f64, slope: f64, spacing: f64, residue: (f64, f64), background: (f64, f64)) -> PoleModelSpec {
    PoleModelSpec {
        transition: TransitionLabel::new([0, 0, 0], [1, 0, 0]).unwrap(),
        kinematics: Kinematics::ReducedMass { mu_amu: 1.5 },
        threshold_mev: None,
        energies: EnergyGrid::Range { start: 40.0, stop: 41.0, step: 0.1 },
        j_max: 25,
        background: Background::constant(Complex64::new(background.0, background.1)),
        poles: vec![
            pole(re, im, slope, residue),
            pole(re + spacing, 1.5 * im, slope, (residue.1, -residue.0)),
        ],
    }
}

fn models() -> impl Strategy<Value = PoleModelSpec> {
    (
        6.0..14.0f64,
        0.1..0.8f64,
        0.2..1.5f64,
        2.0..5.0f64,
        (-0.05..0.05f64, -0.05..0.05f64),
        (-0.4..0.4f64, -0.4..0.4f64),
    )
        .prop_map(|(re, im, slope, d, r, b)| spec(re, im, slope, d, r, b))
        .prop_filter("pole clear of the nodes", |s| s.validate().is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn table_csv_round_trips(s in models()) {
        let table = generate_table(&s).unwrap();
        let mut buf = Vec::new();
        write_smatrix_csv(&table, &mut buf).unwrap();
        let back = load_smatrix_table(buf.as_slice(), &LoadOptions::default()).unwrap();
        prop_assert_eq!(back.energies(), table.energies());
        prop_assert_eq!(back.values(), table.values());
    }

    #[test]
    fn decomposition_identity_holds(s in models()) {
        let table = generate_table(&s).unwrap();
        let frames: Vec<_> = poles_per_energy(&table, &PadePolicy::default())
            .into_iter()
            .map(|(e, r)| (e, r.unwrap()))
            .collect();
        let trajs = track(&frames, &TrackPolicy::default()).unwrap();
        let result = decompose(&table, &trajs, &DecomposeOptions::default());
        for row in &result.rows {
            prop_assert!(row.incomplete.is_none());
            let rebuilt = row.sigma_back_integral + row.sigma_res_total() + row.residual;
            prop_assert!((rebuilt - row.sigma_exact).abs() <= 4.0 * f64::EPSILON * row.sigma_exact.abs());
        }
    }

    #[test]
    fn tracking_ignores_pole_order(s in models(), seed in any::<u64>()) {
        let table = generate_table(&s).unwrap();
        let mut frames: Vec<_> = poles_per_energy(&table, &PadePolicy::default())
            .into_iter()
            .map(|(e, r)| (e, r.unwrap()))
            .collect();
        let reference = track(&frames, &TrackPolicy::default()).unwrap();
        for (i, (_, poles)) in frames.iter_mut().enumerate() {
            if poles.len() > 1 {
                let k = (seed as usize).wrapping_add(i) % poles.len();
                poles.rotate_left(k);
            }
        }
        frames.reverse();
        prop_assert_eq!(track(&frames, &TrackPolicy::default()).unwrap(), reference);
    }

    #[test]
    fn pole_and_trajectory_csv_round_trip(s in models()) {
        let table = generate_table(&s).unwrap();
        let frames: Vec<_> = poles_per_energy(&table, &PadePolicy::default())
            .into_iter()
            .map(|(e, r)| (e, r.unwrap()))
            .collect();
        let records: Vec<PoleRecord> = frames
            .iter()
            .flat_map(|(e, poles)| {
                poles.iter().map(move |p| PoleRecord { axis: Axis::AngularMomentum, fixed_value: *e, pole: p.clone() })
            })
            .collect();
        let mut buf = Vec::new();
        write_poles_csv(&records, &mut buf).unwrap();
        let back = read_poles_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            prop_assert_eq!(a.fixed_value, b.fixed_value);
            prop_assert_eq!(a.pole.position, b.pole.position);
        }

        let trajs = track(&frames, &TrackPolicy::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectories_csv(&trajs, &mut buf).unwrap();
        let back = read_trajectories_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), trajs.len());
        for (a, b) in back.iter().zip(&trajs) {
            prop_assert_eq!(a.energies(), b.energies());
            for (x, y) in a.entries.iter().zip(&b.entries) {
                prop_assert_eq!(x.lambda, y.lambda);
            }
        }
    }
}
