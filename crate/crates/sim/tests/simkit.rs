use std::path::Path;

use raqsim::config::{ExperimentConfig, Scheme};
use raqsim::dataset::{
    extract_features, render_view, synth_dataset, Extractor, SynthParams, ViewStyle,
};
use raqsim::episode::{offline_prediction, run_episode, EpisodeContext};
use raqsim::experiment::{channel_for, prepare_seed, run_experiment, to_csv_string, CSV_COLUMNS};
use raqsim_core::allocate::{brute_force_select, Choice};
use raqsim_core::entropy::{view_entropy, GrayImage};
use raqsim_core::phy::{ChannelConfig, Fading};

fn small_config() -> ExperimentConfig {
    ExperimentConfig::parse(
        "views = 1, 2, 3\nclasses = 4\ntrain_size = 24\ntest_size = 12\nseeds = 0..5\n\
         rb_budget = 33\nsnr_db = 5\ncodebook_samples = 600\n",
        Path::new("."),
    )
    .unwrap()
}

fn params() -> SynthParams {
    SynthParams {
        classes: 3,
        views: 3,
        train_size: 6,
        test_size: 3,
        image_size: 28,
    }
}

#[test]
fn synth_is_deterministic_and_shaped() {
    let ex = Extractor::new(4, 8, 1);
    let a = synth_dataset(&params(), 11, &ex).unwrap();
    let b = synth_dataset(&params(), 11, &ex).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, synth_dataset(&params(), 12, &ex).unwrap());
    assert_eq!((a.train.len(), a.test.len()), (6, 3));
    for o in a.train.iter().chain(&a.test) {
        assert_eq!(o.views.len(), 3);
        assert_eq!(o.features.len(), 3);
        for v in &o.views {
            assert_eq!((v.height(), v.width(), v.levels()), (28, 28, 256));
        }
        assert_eq!(o.features[0].num_subvectors(), 49);
        assert_eq!(o.features[0].dim(), 8);
    }
    assert!(synth_dataset(
        &SynthParams {
            classes: 1,
            ..params()
        },
        0,
        &ex
    )
    .is_err());
}

#[test]
fn denser_views_carry_more_entropy() {
    let mut sparse = 0.0;
    let mut dense = 0.0;
    let n = 120;
    for i in 0..n {
        let style = ViewStyle {
            rotation: 0.1 * i as f64,
            density: 1.0,
            occluder_angle: 0.37 * i as f64,
            occluder_offset: 0.1,
        };
        let a = render_view(5, i % 5, style, 28, 3, i as u64);
        let b = render_view(
            5,
            i % 5,
            ViewStyle {
                density: 3.0,
                ..style
            },
            28,
            3,
            i as u64,
        );
        sparse += view_entropy(&a, 3).unwrap().bits();
        dense += view_entropy(&b, 3).unwrap().bits();
    }
    assert!(
        dense > sparse,
        "dense {} vs sparse {}",
        dense / n as f64,
        sparse / n as f64
    );
}

#[test]
fn extractor_is_linear_and_deterministic() {
    let pixels: Vec<u16> = (0..64).map(|i| (i * 7 % 80) as u16).collect();
    let img = GrayImage::new(8, 8, 256, pixels.clone()).unwrap();
    let f = extract_features(&img, 4, 5, 9).unwrap();
    assert_eq!(f, extract_features(&img, 4, 5, 9).unwrap());

    let tripled = GrayImage::new(8, 8, 256, pixels.iter().map(|p| p * 3).collect()).unwrap();
    let g = extract_features(&tripled, 4, 5, 9).unwrap();
    for (a, b) in f.as_flat().iter().zip(g.as_flat()) {
        assert!((3.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn noiseless_episode_matches_offline_pipeline() {
    let cfg = small_config();
    let setup = prepare_seed(&cfg, 1).unwrap();
    let options = cfg.rate_options().unwrap();
    let fixed = cfg.fixed_rate_options();
    let ctx = EpisodeContext {
        options: &options,
        fixed_options: &fixed,
        codebooks: &setup.codebooks,
        model: &setup.models[2],
        channel: ChannelConfig::noiseless(Fading::Rayleigh),
        modulation: cfg.modulation,
        entropy_window: 3,
        seed: 1,
    };
    for o in &setup.dataset.test {
        let r = run_episode(o, 3, Scheme::RaqDp, 57, &ctx).unwrap();
        assert_eq!(r.plan.choices(), &[Choice::Option(2); 3]);
        assert!(r.bit_errors.iter().all(|&e| e == 0));
        assert_eq!(r.bits_sent, vec![49 * 8; 3]);
        let offline =
            offline_prediction(o, &r.plan, &options, &setup.codebooks, &setup.models[2]).unwrap();
        assert_eq!(r.prediction, offline);
    }
}

#[test]
fn budget_below_cheapest_skips_everything() {
    let cfg = small_config();
    let setup = prepare_seed(&cfg, 0).unwrap();
    let options = cfg.rate_options().unwrap();
    let fixed = cfg.fixed_rate_options();
    let ctx = EpisodeContext {
        options: &options,
        fixed_options: &fixed,
        codebooks: &setup.codebooks,
        model: &setup.models[2],
        channel: channel_for(&cfg, 5.0),
        modulation: cfg.modulation,
        entropy_window: 3,
        seed: 0,
    };
    for scheme in Scheme::ALL {
        for o in &setup.dataset.test {
            let r = run_episode(o, 3, scheme, 9, &ctx).unwrap();
            assert_eq!(r.plan.choices(), &[Choice::Skip; 3]);
            assert!(!r.correct);
            assert_eq!(r.prediction, None);
            assert_eq!(r.rb_used, 0);
        }
    }
}

#[test]
fn equal_entropies_make_raq_and_vq_agree() {
    let cfg = small_config();
    let setup = prepare_seed(&cfg, 2).unwrap();
    let options = cfg.rate_options().unwrap();
    let fixed = cfg.fixed_rate_options();
    let budget = 3 * fixed.options()[0].rb_cost();

    let g = [6.5; 3];
    let raq = brute_force_select(&g, &options, budget).unwrap();
    let vq = brute_force_select(&g, &fixed, budget).unwrap();
    assert_eq!(raq.choices(), &[Choice::Option(1); 3]);
    assert_eq!(vq.choices(), &[Choice::Option(0); 3]);

    let ctx = EpisodeContext {
        options: &options,
        fixed_options: &fixed,
        codebooks: &setup.codebooks,
        model: &setup.models[2],
        channel: channel_for(&cfg, 5.0),
        modulation: cfg.modulation,
        entropy_window: 3,
        seed: 2,
    };
    for o in &setup.dataset.test {
        let mut same = o.clone();
        same.views = vec![o.views[0].clone(); 3];
        same.features = vec![o.features[0].clone(); 3];
        let a = run_episode(&same, 3, Scheme::RaqDp, budget, &ctx).unwrap();
        let b = run_episode(&same, 3, Scheme::VqDp, budget, &ctx).unwrap();
        assert_eq!(a.entropies, b.entropies);
        assert_eq!(a.plan.choices(), &[Choice::Option(1); 3]);
        assert_eq!(a.rb_used, b.rb_used);
        assert_eq!(a.bit_errors, b.bit_errors);
        assert_eq!(a.prediction, b.prediction);
        assert_eq!(a.correct, b.correct);
    }
}

#[test]
fn grid_cardinality_and_bounds() {
    let cfg = small_config();
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 3 * 4 * 5);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.accuracy));
        assert!(r.mean_rb_used <= f64::from(r.rb_budget));
        assert!((0.0..=1.0).contains(&r.mean_bit_error_rate));
    }
    let csv = to_csv_string(&rows).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 60);
    assert_eq!(rows[0].scheme, Scheme::RaqDp);
    assert_eq!((rows[0].views, rows[0].seed, rows[1].seed), (1, 0, 1));
}

#[test]
fn episodes_respect_budget_and_bit_counts() {
    let cfg = small_config();
    let setup = prepare_seed(&cfg, 3).unwrap();
    let options = cfg.rate_options().unwrap();
    let fixed = cfg.fixed_rate_options();
    let ctx = EpisodeContext {
        options: &options,
        fixed_options: &fixed,
        codebooks: &setup.codebooks,
        model: &setup.models[2],
        channel: channel_for(&cfg, 0.0),
        modulation: cfg.modulation,
        entropy_window: 3,
        seed: 3,
    };
    for budget in [10, 24, 33, 41, 57] {
        for scheme in Scheme::ALL {
            for o in &setup.dataset.test {
                let r = run_episode(o, 3, scheme, budget, &ctx).unwrap();
                assert!(r.rb_used <= budget);
                assert!(r.bit_errors.iter().zip(&r.bits_sent).all(|(e, s)| e <= s));
                assert_eq!(r, run_episode(o, 3, scheme, budget, &ctx).unwrap());
            }
        }
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let mut cfg = small_config();
    cfg.seeds = vec![4, 7, 9];
    cfg.schemes = vec![Scheme::RaqRandom, Scheme::VqDp];
    cfg.threads = 1;
    let one = to_csv_string(&run_experiment(&cfg).unwrap()).unwrap();
    cfg.threads = 3;
    let three = to_csv_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(one, three);
}
