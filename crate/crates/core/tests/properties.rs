use std::collections::BTreeSet;

use proptest::prelude::*;

use hicalib_core::adversary::{sample_tau_tree, HardSeqConfig, HardSequence};
use hicalib_core::forecaster::{
    interval_of, smoothed_prediction, ForecastConfig, Forecaster, HierarchicalForecaster, LevelState, Mode,
};
use hicalib_core::harness::lowerbound::UniformForecaster;
use hicalib_core::harness::oracle::random_transcript;
use hicalib_core::harness::protocol::{simulate, SimOptions};
use hicalib_core::metrics::oracle::exhaustive_ece;
use hicalib_core::metrics::{dce, dce_restricted, ece_estimate, RestrictionSpec};
use hicalib_core::rng::{stream, Role};
use hicalib_core::simplex::{
    canonical_key, entropy, kl_divergence, l1_distance, KeyTable, Outcome, RationalDist,
};
use hicalib_core::transcript::{RunHeader, Transcript};

fn dist(d: usize) -> impl Strategy<Value = RationalDist> {
    prop::collection::vec(0u64..6, d)
        .prop_filter("nonzero", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| RationalDist::from_weights(&w).unwrap())
}

fn full_dist(d: usize) -> impl Strategy<Value = RationalDist> {
    prop::collection::vec(1u64..6, d).prop_map(|w| RationalDist::from_weights(&w).unwrap())
}

fn pair_with_dim() -> impl Strategy<Value = (RationalDist, RationalDist, RationalDist)> {
    (2usize..6).prop_flat_map(|d| (dist(d), dist(d), full_dist(d)))
}

fn seed_transcript(seed: u64, d: usize, days: u64, keys: usize) -> Transcript {
    random_transcript(&mut stream(seed, Role::CaseGen, 0), d, days, keys).unwrap()
}

proptest! {
    #[test]
    fn l1_is_a_bounded_metric((a, b, c) in pair_with_dim()) {
        let ab = l1_distance(&a, &b).unwrap();
        prop_assert!((0.0..=2.0).contains(&ab));
        prop_assert_eq!(ab, l1_distance(&b, &a).unwrap());
        prop_assert!(ab <= l1_distance(&a, &c).unwrap() + l1_distance(&c, &b).unwrap() + 1e-12);
        prop_assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn pinsker((x, _, p) in pair_with_dim()) {
        let l1 = l1_distance(&x, &p).unwrap();
        let kl = kl_divergence(&x, &p).unwrap();
        prop_assert!(l1 <= (2.0 * kl).sqrt() + 1e-12);
    }

    #[test]
    fn entropy_is_bounded((x, _, _) in pair_with_dim()) {
        let h = entropy(&x);
        prop_assert!(h >= 0.0 && h <= (x.dim() as f64).ln() + 1e-12);
    }

    #[test]
    fn keys_ignore_representation(w in prop::collection::vec(0u64..9, 2..6), scale in 1u64..50) {
        prop_assume!(w.iter().any(|&x| x > 0));
        let total: u64 = w.iter().sum();
        let a = RationalDist::from_u64(&w, total).unwrap();
        let scaled: Vec<u64> = w.iter().map(|x| x * scale).collect();
        let b = RationalDist::from_u64(&scaled, total * scale).unwrap();
        prop_assert_eq!(canonical_key(&a), canonical_key(&b));
        let mut table = KeyTable::new();
        prop_assert_eq!(table.intern(&a), table.intern(&b));
    }

    #[test]
    fn intervals_are_prefix_consistent(levels in 1usize..4, h in 2u64..5, s in 1u64..4, frac in 0.0f64..1.0) {
        let cfg = ForecastConfig::new(2, levels, h, s, 1).unwrap();
        let t = 1 + ((cfg.horizon() - 1) as f64 * frac) as u64;
        let full = interval_of(t, levels, &cfg).unwrap();
        for l in 1..levels {
            prop_assert_eq!(&interval_of(t, l, &cfg).unwrap()[..], &full[..l]);
        }
        prop_assert!(full.iter().all(|&x| (1..=h).contains(&x)));
    }

    #[test]
    fn incremental_state_matches_history(levels in 1usize..4, h in 2u64..4, s in 1u64..3, m in 1u64..3, seed: u64) {
        let cfg = ForecastConfig::new(3, levels, h, s, m).unwrap();
        let mut rng = stream(seed, Role::Outcome, 0);
        let xs: Vec<Outcome> = (0..cfg.horizon())
            .map(|_| Outcome::new(rand::Rng::gen_range(&mut rng, 1..=3), 3).unwrap())
            .collect();
        let mut f = HierarchicalForecaster::new(cfg);
        let mut keys = KeyTable::new();
        for t in 1..=cfg.horizon() {
            f.mixture(t, &mut keys, None).unwrap();
            for l in 1..=levels {
                let rebuilt = LevelState::from_history(&cfg, l, t, &xs).unwrap();
                // running counts also include the current iteration's days
                let live = &f.levels()[l - 1];
                prop_assert_eq!(live.iteration, rebuilt.iteration);
                prop_assert_eq!(&live.prediction, &rebuilt.prediction);
                prop_assert!(rebuilt.prediction.is_full_support());
            }
            f.observe(t, xs[t as usize - 1]).unwrap();
        }
    }

    #[test]
    fn smoothed_steps_are_small(
        counts in prop::collection::vec(0u64..20, 2..6),
        step in prop::collection::vec(0u64..20, 2..6),
        m in 1u64..5,
    ) {
        let d = counts.len().min(step.len());
        let (counts, step) = (&counts[..d], &step[..d]);
        // one iteration adds exactly T_ℓ outcomes; pad the first coordinate
        let len: u64 = step.iter().sum::<u64>().max(1);
        let mut step = step.to_vec();
        if step.iter().sum::<u64>() == 0 {
            step[0] = 1;
        }
        let before: u64 = counts.iter().sum();
        let rounds = before.div_ceil(len).max(1);
        let mut counts = counts.to_vec();
        counts[0] += rounds * len - before;
        let h = rounds + 1;
        let p = smoothed_prediction(&counts, h, len, m);
        let next: Vec<u64> = counts.iter().zip(&step).map(|(a, b)| a + b).collect();
        let q = smoothed_prediction(&next, h + 1, len, m);
        prop_assert!(l1_distance(&p, &q).unwrap() <= 2.0 / (h + m) as f64 + 1e-12);
    }

    #[test]
    fn restriction_is_monotone(seed: u64, d in 2usize..5, days in 1u64..12, drop_p in 0usize..4, drop_c in 1usize..5) {
        let tr = seed_transcript(seed, d, days, 3);
        let full = RestrictionSpec::full(&tr);
        let mut small = full.clone();
        let preds: Vec<_> = full.predictions.iter().cloned().collect();
        for p in preds.iter().take(drop_p.min(preds.len())) {
            small.predictions.remove(p);
        }
        small.coords.remove(&drop_c);
        let a = dce_restricted(&tr, &small).unwrap();
        let b = dce_restricted(&tr, &full).unwrap();
        prop_assert!(a <= b + 1e-12);
        prop_assert!((b - dce(&tr).unwrap()).abs() < 1e-12);
        let empty = RestrictionSpec { coords: BTreeSet::new(), ..full };
        prop_assert_eq!(dce_restricted(&tr, &empty).unwrap(), 0.0);
        prop_assert!(b <= 2.0 * days as f64);
    }

    #[test]
    fn splitting_an_entry_keeps_dce(seed: u64, d in 2usize..5, days in 1u64..12) {
        let tr = seed_transcript(seed, d, days, 3);
        let mut split = Transcript::blank(d);
        for day in &tr.days {
            let entries: Vec<(RationalDist, u64)> = day
                .mixture
                .entries
                .iter()
                .flat_map(|e| {
                    let p = tr.keys.get(e.key).clone();
                    [(p.clone(), e.weight), (p, e.weight)]
                })
                .collect();
            split.push_day(&entries, 2 * day.mixture.denominator, day.outcome, None).unwrap();
        }
        prop_assert!((dce(&tr).unwrap() - dce(&split).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ece_dominates_dce(seed: u64, days in 1u64..9) {
        let tr = seed_transcript(seed, 2, days, 2);
        let ece = exhaustive_ece(&tr, 1 << 10).unwrap();
        prop_assert!(ece + 1e-12 >= dce(&tr).unwrap());
        prop_assert!(ece <= 2.0 * days as f64);
    }
}

#[test]
fn uniform_forecaster_dce_has_closed_form() {
    for (r, k) in [(2, 2), (3, 2), (3, 3)] {
        let cfg = HardSeqConfig::new(r, k).unwrap();
        let tree = sample_tau_tree(&cfg, &mut stream(8, Role::Tau, 0));
        let header = RunHeader {
            run_id: "uniform".into(),
            seed: 8,
            prng: String::new(),
            d: cfg.d(),
            config: None,
            mode: Mode::Distributional,
            adversary: "hard".into(),
            days: cfg.horizon(),
        };
        let opts = SimOptions {
            mode: Mode::Distributional,
            record_adversary: false,
        };
        let tr = simulate(&mut UniformForecaster::default(), &mut HardSequence::new(tree), header, 0, opts).unwrap();
        // a single key: Σ_i |T/d − #{t: x_t = i}|
        let d = cfg.d();
        let t = cfg.horizon() as f64;
        let mut hist = vec![0f64; d];
        for x in tr.outcomes() {
            hist[x.zero_based()] += 1.0;
        }
        let closed: f64 = hist.iter().map(|c| (t / d as f64 - c).abs()).sum();
        assert!((dce(&tr).unwrap() - closed).abs() < 1e-12, "R={r} K={k}");
    }
}

#[test]
fn quadrupling_trials_halves_stderr() {
    let tr = seed_transcript(31, 2, 10, 2);
    let resample = |trial: u64| {
        let mut rng = stream(5, Role::Forecaster, trial);
        let mut out = tr.clone();
        for day in &mut out.days {
            day.realized = Some(hicalib_core::forecaster::sample_prediction(&day.mixture, &mut rng));
        }
        Ok(out)
    };
    let small = ece_estimate(500, resample).unwrap();
    let large = ece_estimate(2000, resample).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
}
