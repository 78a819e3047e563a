//! Randomized invariants. Each block states a rule the rest of the crate is
//! allowed to assume (format round-trips, pair counting, solver descent,
//! margin growth) and lets proptest hunt for a counterexample.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sparsesel::gabor::{read_gfv, write_gfv, GaborFeatureVector, DOWNSAMPLE};
use sparsesel::pairs::{
    count_pairs, manifest_pair_counts, read_sppm, write_sppm, DatasetManifest, ManifestEntry,
};
use sparsesel::pgm::{read_pgm, write_pgm};
use sparsesel::rng::SplitMix64;
use sparsesel::shk::{margin_update, positive_part};
use sparsesel::solvers::{solve_l1, solve_mp_traced, solve_omp_traced, L1Config, StoppingRule};
use sparsesel::types::{
    AugmentedFeatureMatrix, AugmentedSample, FeatureVector, Label, MarginVector,
};

fn label_strategy() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Positive), Just(Label::Negative)]
}

/// Random instances for the pursuit solvers. Each column gets a +-4 bump on
/// its own row with small noise elsewhere, which keeps the dictionary well
/// conditioned: matching pursuit on nearly collinear columns can take an
/// astronomical number of refinement passes to stall, and that is a property
/// of the algorithm, not a bug these tests should spend hours rediscovering.
fn instance_strategy() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (3usize..7, 2usize..6)
        .prop_map(|(n, d)| (n, d.min(n)))
        .prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(-0.3..0.3f64, n * d),
                proptest::collection::vec(-2.0..2.0f64, n),
                proptest::sample::subsequence((0..n).collect::<Vec<_>>(), d),
                proptest::collection::vec(prop_oneof![Just(-1.0), Just(1.0)], d),
            )
                .prop_map(move |(vals, target, rows, signs)| {
                    let mut m = Array2::from_shape_vec((n, d), vals).unwrap();
                    for j in 0..d {
                        m[[rows[j], j]] += 4.0 * signs[j];
                    }
                    (m, Array1::from_vec(target))
                })
        })
}

proptest! {
    #[test]
    fn pair_counts_match_exhaustive_enumeration(
        sizes in proptest::collection::vec(1usize..5, 2..6),
    ) {
        let mut entries = Vec::new();
        for (s, &k) in sizes.iter().enumerate() {
            for i in 0..k {
                entries.push(ManifestEntry {
                    path: format!("s{s}_i{i}"),
                    subject: format!("s{s}"),
                });
            }
        }
        let manifest = DatasetManifest::new(entries.clone()).unwrap();
        let counts = manifest_pair_counts(&manifest);
        let mut intra = 0u64;
        let mut extra = 0u64;
        for i in 0..entries.len() {
            for j in i + 1..entries.len() {
                if entries[i].subject == entries[j].subject {
                    intra += 1;
                } else {
                    extra += 1;
                }
            }
        }
        prop_assert_eq!(counts.intra, intra);
        prop_assert_eq!(counts.extra, extra);
        prop_assert_eq!(counts.total, intra + extra);
    }

    #[test]
    fn uniform_pair_counts_match_the_closed_form(c in 1u64..5, k in 1u64..5) {
        let entries = (0..c)
            .flat_map(|s| (0..k).map(move |i| (s, i)))
            .map(|(s, i)| ManifestEntry {
                path: format!("s{s}_i{i}"),
                subject: format!("s{s}"),
            })
            .collect();
        let manifest = DatasetManifest::new(entries).unwrap();
        prop_assert_eq!(count_pairs(c, k), manifest_pair_counts(&manifest));
    }

    #[test]
    fn sppm_round_trip_preserves_rows_and_labels(
        n in 1usize..6,
        d in 2usize..6,
        seed in any::<u64>(),
        labels in proptest::collection::vec(label_strategy(), 6),
    ) {
        let mut rng = SplitMix64::new(seed);
        let data = Array2::from_shape_fn((n, d), |_| rng.range_f64(-1e6, 1e6));
        let matrix =
            AugmentedFeatureMatrix::from_raw_labeled(data, labels[..n].to_vec()).unwrap();
        let mut buf = Vec::new();
        write_sppm(&mut buf, &matrix).unwrap();
        let back = read_sppm(buf.as_slice()).unwrap();
        prop_assert_eq!(back.data(), matrix.data());
        prop_assert_eq!(back.labels().unwrap(), matrix.labels().unwrap());
    }

    #[test]
    fn gfv_round_trip_is_exact(
        values in proptest::collection::vec(-1e12..1e12f64, 1..64),
    ) {
        let fv = GaborFeatureVector { values, downsample: DOWNSAMPLE };
        let mut buf = Vec::new();
        write_gfv(&mut buf, &fv).unwrap();
        let back = read_gfv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values, fv.values);
        prop_assert_eq!(back.downsample, fv.downsample);
    }

    #[test]
    fn manifest_csv_round_trips_awkward_field_text(
        bases in proptest::collection::vec("[a-zA-Z0-9 ,\"'._-]{0,8}", 1..6),
        subjects in proptest::collection::vec("[a-zA-Z0-9 ,\"'._-]{1,8}", 6),
    ) {
        let entries: Vec<ManifestEntry> = bases
            .iter()
            .enumerate()
            .map(|(i, b)| ManifestEntry {
                path: format!("{b}#{i}"),
                subject: subjects[i].clone(),
            })
            .collect();
        let manifest = DatasetManifest::new(entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        manifest.write_csv(&path).unwrap();
        prop_assert_eq!(DatasetManifest::read_csv(&path).unwrap(), manifest);
    }

    #[test]
    fn pgm_round_trip_stays_within_half_a_grey_level(
        h in 1usize..8,
        w in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = SplitMix64::new(seed);
        let image = Array2::from_shape_fn((h, w), |_| rng.range_f64(0.0, 1.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        write_pgm(&path, &image).unwrap();
        let back = read_pgm(&path).unwrap();
        prop_assert_eq!(back.dim(), image.dim());
        for (a, b) in image.iter().zip(back.iter()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pursuit_residuals_never_increase_on_random_instances(
        (m, b) in instance_strategy(),
    ) {
        let d = m.ncols();
        let y = AugmentedFeatureMatrix::from_raw(m).unwrap();
        let stop = StoppingRule { residual_threshold: None, max_atoms: Some(d) };
        for trace in [
            solve_mp_traced(&y, &b, &stop, &[]).unwrap().1,
            solve_omp_traced(&y, &b, &stop, &[]).unwrap().1,
        ] {
            for pair in trace.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-9 * (1.0 + pair[0]));
            }
        }
    }

    #[test]
    fn omp_leaves_residual_orthogonal_to_its_support(
        (m, b) in instance_strategy(),
    ) {
        let d = m.ncols();
        let y = AugmentedFeatureMatrix::from_raw(m).unwrap();
        let stop = StoppingRule { residual_threshold: None, max_atoms: Some(d) };
        let sol = solve_omp_traced(&y, &b, &stop, &[]).unwrap().0;
        let mut seen = std::collections::HashSet::new();
        for &j in &sol.support {
            prop_assert!(seen.insert(j), "column {} selected twice", j);
        }
        let r = &b - &y.product(&sol.augmented_vector(y.dim()).unwrap()).unwrap();
        let rnorm = r.dot(&r).sqrt();
        for &j in &sol.support {
            let col = y.column(j);
            let cnorm = col.dot(&col).sqrt();
            prop_assert!(col.dot(&r).abs() <= 1e-7 * cnorm * rnorm + 1e-9);
        }
    }

    #[test]
    fn l1_at_or_above_the_zero_threshold_returns_the_zero_solution(
        (m, b) in instance_strategy(),
        slack in 1.0..2.0f64,
    ) {
        let y = AugmentedFeatureMatrix::from_raw(m).unwrap();
        let gmax = y
            .data()
            .t()
            .dot(&b)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let cfg = L1Config {
            gamma: (gmax + 1e-9) * slack,
            max_iterations: 5000,
            convergence_tol: 1e-10,
            step_size: None,
        };
        let sol = solve_l1(&y, &b, &cfg, &[]).unwrap();
        prop_assert!(sol.support.is_empty(), "support {:?} for gamma {}", sol.support, cfg.gamma);
    }

    #[test]
    fn margin_updates_grow_exactly_by_the_positive_errors(
        pairs in proptest::collection::vec((0.01..10.0f64, -5.0..5.0f64), 1..8),
        eta in 1e-3..2.0f64,
    ) {
        let b = MarginVector::new(Array1::from_iter(pairs.iter().map(|p| p.0))).unwrap();
        let e = Array1::from_iter(pairs.iter().map(|p| p.1));
        let next = margin_update(&b, &e, eta).unwrap();
        for i in 0..pairs.len() {
            if e[i] > 0.0 {
                prop_assert_eq!(next.values()[i], b.values()[i] + (2.0 * eta) * e[i]);
            } else {
                prop_assert_eq!(next.values()[i], b.values()[i]);
            }
        }
        let pp = positive_part(&e);
        prop_assert!(pp.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(positive_part(&pp), pp);
    }

    #[test]
    fn signing_negates_whole_rows_once(
        values in proptest::collection::vec(-1e6..1e6f64, 1..6),
        label in label_strategy(),
    ) {
        let x = FeatureVector::from_vec(values.clone()).unwrap();
        let signed = AugmentedSample::signed(&x, label);
        let twice = signed.clone().apply_sign();
        prop_assert_eq!(&twice, &signed);
        let sign = match label {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        };
        prop_assert_eq!(signed.values()[0], sign);
        for (i, &v) in values.iter().enumerate() {
            prop_assert_eq!(signed.values()[i + 1], sign * v);
        }
    }

    #[test]
    fn derived_rng_streams_replay_exactly(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = SplitMix64::derive(seed, stream);
        let mut b = SplitMix64::derive(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        let lo = -1e6;
        let hi = 1e6;
        for _ in 0..16 {
            let x = a.range_f64(lo, hi);
            prop_assert!(x.is_finite() && x >= lo && x <= hi);
        }
    }
}
