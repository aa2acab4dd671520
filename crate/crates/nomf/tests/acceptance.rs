//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with `-- --nocapture` to see
//! them for passing tests).

use std::sync::OnceLock;

use nomf::cli::{default_objects, propose_regions};
use nomf::cost_model::{
    self, count_resources, default_energy_table, CostParams, Method, ResourceCounts,
};
use nomf::event_io::{self, SyntheticSceneConfig};
use nomf::filters::{self, flipped_fraction, median_overlap, nomf};
use nomf::framer::{accumulate, EbbiFrame};
use nomf::geom::SensorGeometry;
use nomf::imc_sim::{self, ArrayConfig, MismatchModel};
use nomf::pbm::{read_pbm, write_pbm, PbmFormat};
use nomf::tracker_eval::{evaluate, FrameBoxes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(id: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {id:02} {name}: PASS ({detail})");
}

fn random_frame(rng: &mut ChaCha8Rng, geometry: SensorGeometry, density: f64) -> EbbiFrame {
    let bits: Vec<u8> =
        (0..geometry.pixel_count()).map(|_| rng.gen_bool(density) as u8).collect();
    EbbiFrame::from_bits(geometry, bits, 0, 1000)
}

/// Sort-based median oracle with zero padding, independent of the counting
/// implementation under test.
fn median_sort_oracle(frame: &EbbiFrame, n: usize) -> EbbiFrame {
    let r = (n / 2) as i32;
    let mut out = EbbiFrame::zeros(frame.geometry(), frame.window_start, frame.window_len);
    for y in 0..frame.height() as i32 {
        for x in 0..frame.width() as i32 {
            let mut vals = Vec::with_capacity(n * n);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xx, yy) = (x + dx, y + dy);
                    let inside = xx >= 0
                        && yy >= 0
                        && xx < frame.width() as i32
                        && yy < frame.height() as i32;
                    vals.push(if inside { frame.get(xx as u16, yy as u16) } else { 0 });
                }
            }
            vals.sort_unstable();
            out.set(x as u16, y as u16, vals[vals.len() / 2]);
        }
    }
    out
}

#[test]
fn criterion_01_median_oracle_equivalence() {
    let geometry = SensorGeometry::new(32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1000 {
        let density = rng.gen_range(0.05..0.95);
        let frame = random_frame(&mut rng, geometry, density);
        for n in [3, 5] {
            assert_eq!(median_overlap(&frame, n).unwrap(), median_sort_oracle(&frame, n));
        }
    }
    pass(1, "median-oracle-equivalence", "1000 random 32x32 frames, n in {3,5}, exact");
}

#[test]
fn criterion_02_nomf_equals_imc_at_zero_sigma() {
    let geometry = SensorGeometry::qvga();
    let mm = MismatchModel::ideal(202);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..1000u32 {
        let n = if i % 2 == 0 { 3 } else { 5 };
        let cfg = ArrayConfig::new(n, 1.2).unwrap();
        let frame = random_frame(&mut rng, geometry, 0.3);
        let (out, stats) = imc_sim::filter_frame_imc(&frame, &cfg, &mm).unwrap();
        assert_eq!(out, nomf(&frame, n).unwrap());
        assert_eq!(stats.unintended_flips, 0);
    }
    pass(2, "nomf-equals-imc-at-sigma-zero", "1000 random 320x240 frames, bit-exact");
}

#[test]
fn criterion_03_flip_rate_calibration() {
    let cfg = ArrayConfig::default();
    let mm = imc_sim::calibrated_model(2);
    let low = imc_sim::monte_carlo_flip_rate(4, 5, 1.0, 100_000, &mm, &cfg).unwrap();
    assert!(
        (low.flip_rate - 0.025).abs() <= 0.010,
        "1.0 V margin-1 rate {} outside 2.5% +- 1 pp",
        low.flip_rate
    );
    let high = imc_sim::monte_carlo_flip_rate(4, 5, 1.2, 200, &mm, &cfg).unwrap();
    assert_eq!(high.flip_rate, 0.0, "flips observed in 200 trials at 1.2 V");
    pass(
        3,
        "flip-rate-calibration",
        &format!("{:.4} at 1.0 V (1e5 trials); 0/200 at 1.2 V", low.flip_rate),
    );
}

#[test]
fn criterion_04_timing_reproduction() {
    let cfg3 = ArrayConfig::new(3, 1.2).unwrap();
    assert_eq!(cfg3.cycles_per_frame(), 160);
    let latency3 = cfg3.frame_latency_s();
    assert!((latency3 - 0.8e-6).abs() < 1e-15);
    let frames_per_us = 1e-6 / latency3;
    assert!((frames_per_us - 1.25).abs() < 1e-9);

    // Derived n=5 value. Note: 2*ceil(240/5) cycles give 0.48 us/frame
    // (about 2.08 frames/us), which does not match the published peak range
    // upper bound of 1.66 frames/us; both derived numbers are reported.
    let cfg5 = ArrayConfig::new(5, 1.2).unwrap();
    assert_eq!(cfg5.cycles_per_frame(), 96);
    assert!((cfg5.frame_latency_s() - 0.48e-6).abs() < 1e-15);
    pass(
        4,
        "timing-reproduction",
        "n=3: 160 cycles, 0.8 us, 1.25 frames/us; n=5 derived: 96 cycles, 0.48 us",
    );
}

#[test]
fn criterion_05_resource_formulas() {
    let p = CostParams::default();
    assert_eq!(
        count_resources(Method::NomfImc, &p),
        ResourceCounts { reads: 25_600, writes: 2_765, ops: 0, bits: 76_800 }
    );
    // symbolic shape of all four rows, checked at several sizes
    for (w, h) in [(320u32, 240u32), (128, 96), (17, 13)] {
        let p = CostParams { width: w, height: h, ..CostParams::default() };
        let d = p.d();
        let n2 = u64::from(p.n * p.n);
        assert_eq!(
            count_resources(Method::Median, &p),
            ResourceCounts { reads: n2 * d, writes: d, ops: n2 * d, bits: 2 * d }
        );
        assert_eq!(
            count_resources(Method::Nomf, &p),
            ResourceCounts { reads: d, writes: d, ops: d, bits: d }
        );
        let nn = count_resources(Method::NnFilt, &p);
        assert_eq!(nn.bits, u64::from(p.beta_t) * d);
        assert_eq!(
            nn.reads,
            (f64::from(p.beta_t) * p.gamma * n2 as f64 * d as f64).ceil() as u64
        );
        let imc = count_resources(Method::NomfImc, &p);
        assert_eq!(imc.reads, (d as f64 / f64::from(p.n)).ceil() as u64);
        assert_eq!(imc.writes, (p.alpha * d as f64).ceil() as u64);
        assert_eq!(imc.ops, 0);
        assert_eq!(imc.bits, d);
    }
    pass(5, "resource-formulas", "all four rows; nomf_imc = (25600, 2765, 0, 76800) at D=76800");
}

#[test]
fn criterion_06_savings_decomposition() {
    let s = cost_model::savings_decomposition(&CostParams::default(), &default_energy_table())
        .unwrap();
    assert!((1900.0..=2200.0).contains(&s.total), "total {}", s.total);
    assert_eq!(s.approx, 9.0);
    assert!((210.0..=240.0).contains(&s.imc), "imc {}", s.imc);
    pass(
        6,
        "savings-decomposition",
        &format!("total {:.0}x = 9x approx * {:.1}x imc", s.total, s.imc),
    );
}

#[test]
fn criterion_07_throughput() {
    let p = CostParams::default();
    let gops3 = cost_model::throughput_gops(3, 1.25e6, &p).unwrap();
    assert!((gops3 - 85.3).abs() <= 0.5, "n=3 gops {gops3}");
    let rate5 = 1.0 / ArrayConfig::new(5, 1.2).unwrap().frame_latency_s();
    let gops5 = cost_model::throughput_gops(5, rate5, &p).unwrap();
    assert!((gops5 - 153.0).abs() <= 1.0, "n=5 gops {gops5}");
    pass(7, "throughput", &format!("{gops3:.1} GOPS (n=3), {gops5:.1} GOPS (n=5)"));
}

/// Shared synthetic traffic-like corpus: 500 frames at 66 ms, three moving
/// objects, calibrated background noise.
struct Corpus {
    frames: Vec<EbbiFrame>,
    ground_truth: FrameBoxes,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let geometry = SensorGeometry::qvga();
        let cfg = SyntheticSceneConfig {
            geometry,
            objects: default_objects(3, geometry, 300.0, 60.0),
            noise_rate: 0.5,
            duration_s: 33.0,
            window_len_us: 66_000,
            seed: 11,
        };
        let (events, ground_truth) = event_io::generate_synthetic(&cfg).unwrap();
        let frames: Vec<EbbiFrame> = accumulate(&events, geometry, cfg.window_len_us)
            .unwrap()
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        assert!(frames.len() >= 500, "corpus has {} frames", frames.len());
        Corpus { frames, ground_truth }
    })
}

#[test]
fn criterion_08_downstream_quality_parity() {
    let corpus = corpus();
    let gt: FrameBoxes =
        corpus.ground_truth.iter().filter(|(_, b)| !b.is_empty()).cloned().collect();
    let mut curves = Vec::new();
    for method in ["nomf", "median"] {
        let filtered: Vec<EbbiFrame> = corpus
            .frames
            .iter()
            .map(|f| {
                if method == "nomf" {
                    nomf(f, 3).unwrap()
                } else {
                    median_overlap(f, 3).unwrap()
                }
            })
            .collect();
        let proposals = propose_regions(&filtered, 8);
        curves.push(evaluate(&proposals, &gt, &[0.5], 40).unwrap());
    }
    let (p_nomf, r_nomf) = (curves[0].precision[0], curves[0].recall[0]);
    let (p_med, r_med) = (curves[1].precision[0], curves[1].recall[0]);
    assert!(
        (p_nomf - p_med).abs() <= 0.05,
        "precision gap {:.3} (nomf {p_nomf:.3}, median {p_med:.3})",
        (p_nomf - p_med).abs()
    );
    assert!(
        (r_nomf - r_med).abs() <= 0.05,
        "recall gap {:.3} (nomf {r_nomf:.3}, median {r_med:.3})",
        (r_nomf - r_med).abs()
    );
    pass(
        8,
        "downstream-quality-parity",
        &format!(
            "IoU 0.5: nomf P/R {p_nomf:.3}/{r_nomf:.3}, median P/R {p_med:.3}/{r_med:.3}"
        ),
    );
}

#[test]
fn criterion_09_invariant_suites() {
    // flip rate non-increasing in margin and in vdd
    let cfg = ArrayConfig::default();
    let mm = imc_sim::calibrated_model(909);
    let mut prev = f64::INFINITY;
    for margin in [1u32, 3, 5, 7, 9] {
        let ones = (9 - margin) / 2;
        let rate =
            imc_sim::monte_carlo_flip_rate(ones, 9 - ones, 1.0, 50_000, &mm, &cfg).unwrap().flip_rate;
        assert!(rate <= prev + 0.005, "margin {margin}");
        prev = rate;
    }
    let mut prev = f64::INFINITY;
    for vdd in [1.0, 1.05, 1.1, 1.15, 1.2] {
        let rate =
            imc_sim::monte_carlo_flip_rate(4, 5, vdd, 50_000, &mm, &cfg).unwrap().flip_rate;
        assert!(rate <= prev + 0.005, "vdd {vdd}");
        prev = rate;
    }

    // precision/recall monotone in IoU threshold on the shared corpus
    let corpus = corpus();
    let gt: FrameBoxes =
        corpus.ground_truth.iter().filter(|(_, b)| !b.is_empty()).cloned().collect();
    let filtered: Vec<EbbiFrame> = corpus.frames.iter().map(|f| nomf(f, 3).unwrap()).collect();
    let proposals = propose_regions(&filtered, 8);
    let thresholds: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let curve = evaluate(&proposals, &gt, &thresholds, 40).unwrap();
    for w in curve.precision.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    for w in curve.recall.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }

    // event and frame I/O round trips
    let geometry = SensorGeometry::qvga();
    let cfg_small = SyntheticSceneConfig {
        geometry,
        objects: default_objects(2, geometry, 100.0, 40.0),
        noise_rate: 1.0,
        duration_s: 0.3,
        window_len_us: 66_000,
        seed: 99,
    };
    let (events, _) = event_io::generate_synthetic(&cfg_small).unwrap();
    let mut bin = Vec::new();
    event_io::write_binary(&mut bin, &events).unwrap();
    assert_eq!(event_io::parse_binary(bin.as_slice(), geometry, true).unwrap(), events);
    let mut csv = Vec::new();
    event_io::write_csv(&mut csv, &events).unwrap();
    assert_eq!(event_io::parse_csv(csv.as_slice(), geometry, true).unwrap(), events);
    let frame = &corpus.frames[10];
    for format in [PbmFormat::Plain, PbmFormat::Raw] {
        let mut buf = Vec::new();
        write_pbm(&mut buf, frame, format).unwrap();
        assert_eq!(&read_pbm(&mut buf.as_slice()).unwrap(), frame);
    }

    // seeded runs are independent of the rayon thread count
    let imc_cfg = ArrayConfig { vdd: 1.0, ..ArrayConfig::default() };
    let mm = imc_sim::calibrated_model(2);
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let (a, _) = pool1.install(|| imc_sim::filter_frame_imc(frame, &imc_cfg, &mm)).unwrap();
    let (b, _) = pool8.install(|| imc_sim::filter_frame_imc(frame, &imc_cfg, &mm)).unwrap();
    assert_eq!(a, b);

    pass(
        9,
        "invariant-suites",
        "flip-rate monotonicity, P/R monotonicity, I/O round trips, thread independence",
    );
}

#[test]
fn criterion_10_alpha_measurement() {
    let corpus = corpus();
    let mut sum = 0.0;
    for frame in &corpus.frames {
        let filtered = nomf(frame, 3).unwrap();
        sum += flipped_fraction(frame, &filtered).unwrap();
    }
    let alpha = sum / corpus.frames.len() as f64;
    assert!(alpha > 0.0 && alpha < 0.2, "alpha {alpha}");
    pass(
        10,
        "alpha-measurement",
        &format!("measured alpha {alpha:.4} over {} frames (reference point 0.036)", corpus.frames.len()),
    );
}

#[test]
fn nn_filt_retains_object_support() {
    // event-domain baseline sanity on a seeded scene: NN-filt thins the
    // stream but keeps correlated object activity
    let geometry = SensorGeometry::qvga();
    let cfg = SyntheticSceneConfig {
        geometry,
        objects: default_objects(2, geometry, 300.0, 60.0),
        noise_rate: 0.5,
        duration_s: 1.0,
        window_len_us: 66_000,
        seed: 5,
    };
    let (events, _) = event_io::generate_synthetic(&cfg).unwrap();
    let kept =
        filters::nn_filt(&events, filters::NnFiltConfig::new(66_000), geometry).unwrap();
    assert!(kept.len() < events.len());
    assert!(kept.len() > events.len() / 4, "kept only {} of {}", kept.len(), events.len());
}
