//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints a PASS/FAIL line even when an earlier one fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terra_core::array::{make_codebook, ArrayGeometry, Codebook};
use terra_core::channel::{self, Blocker, ChannelConfig, Link, Pose};
use terra_core::sweep::Trace;
use terra_core::terra::ProbePurpose;
use terra_core::{analysis, baselines, deployment};
use terra_sim::{batch, presets, report, ScenarioFile};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_preset(file: &ScenarioFile, runs: usize) -> Vec<Trace> {
    let seeds: Vec<u64> = (0..runs as u64).map(|i| file.sim.seed + i).collect();
    batch::run_seeds(file, &seeds, batch::default_jobs())
        .expect("preset runs")
        .into_iter()
        .map(|r| r.summary.trace)
        .collect()
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Share of blockage intervals with no outage interval overlapping them.
fn avoided(traces: &[Trace]) -> (usize, usize) {
    let mut events = 0;
    let mut clean = 0;
    for tr in traces {
        let outages = tr.outage_intervals();
        for b in tr.blockage_intervals() {
            events += 1;
            if !outages.iter().any(|&o| overlaps(o, b)) {
                clean += 1;
            }
        }
    }
    (clean, events)
}

fn blocking_range() -> Outcome {
    let r = channel::d_br_max(6.0, 2.5, 1.0, 1.78).map_err(|e| e.to_string())?;
    // similar triangles, worked by hand
    let expected = 6.0 * (1.78 - 1.0) / (2.5 - 1.0);
    check(
        (r.distance - 3.12).abs() <= 0.005 && (r.distance - expected).abs() < 1e-12,
        format!("d_br_max = {:.4} m", r.distance),
    )
}

fn pencil_linear(zen: f64) -> Codebook {
    make_codebook(
        ArrayGeometry::linear(12, 60e9),
        (0.0, 0.0),
        (zen, zen),
        1,
        1,
    )
    .unwrap()
}

fn pencil_planar(zen: f64) -> Codebook {
    make_codebook(
        ArrayGeometry::planar(12, 4, 60e9),
        (0.0, 0.0),
        (zen, zen),
        1,
        1,
    )
    .unwrap()
}

fn calibrated_channel() -> Outcome {
    // measured concrete levels per tilt; both distance rows are accepted
    let table = [
        (0.0, [-66.0, -66.0]),
        (10.0, [-64.7, -64.5]),
        (20.0, [-64.1, -64.0]),
    ];
    let rx = Pose::new(6.0, 0.0, 1.0, 180.0, 0.0);
    let los_zen = -(1.5f64 / 6.0).atan().to_degrees();
    let gr_zen = (3.5f64 / 6.0).atan().to_degrees();
    let (tx_cb, rx_los, rx_gr) = (
        pencil_linear(0.0),
        pencil_planar(los_zen),
        pencil_planar(gr_zen),
    );
    let mut lines = Vec::new();
    let mut ok = true;
    for (tilt, levels) in table {
        let tx = Pose::new(0.0, 0.0, 2.5, 0.0, tilt);
        let mut cfg = ChannelConfig {
            gr_loss_table: channel::CONCRETE_GR_LOSS.to_vec(),
            ..ChannelConfig::default()
        };
        cfg.system_loss =
            channel::calibrate_system_loss(&cfg, &tx, &rx, (&tx_cb, 0), (&rx_los, 0), -60.0);
        let los = channel::rss(&cfg, &tx, &rx, (&tx_cb, 0), (&rx_los, 0), &[]);
        let gr = Link::new(&cfg, &tx, &rx).path_rss(&cfg, (&tx_cb, 0), (&rx_gr, 0), [false; 2])[1]
            .ok_or("no ground bounce")?;
        // a pedestrian standing 1.5 m from the receiver also shades the bounce point
        let walker = Blocker::new(4.5, 0.0, 1.78, 0.3);
        let blocked = channel::rss(&cfg, &tx, &rx, (&tx_cb, 0), (&rx_los, 0), &[walker]);
        let fits = levels.iter().all(|l| (gr - l).abs() <= 0.5);
        ok &= fits && (los + 60.0).abs() < 1e-9 && blocked == -78.0;
        lines.push(format!("tilt {tilt}: GR {gr:.2}, blocked {blocked}"));
    }
    check(ok, lines.join("; "))
}

fn blockage_recovery() -> Outcome {
    let file = presets::load("blockage_concrete").map_err(|e| e.to_string())?;
    let (clean, events) = avoided(&run_preset(&file, 50));
    let frac = clean as f64 / events as f64;

    let mut always = file.clone();
    always
        .blockers
        .as_mut()
        .ok_or("preset has no blockers")?
        .gr_availability = 1.0;
    let (clean_all, events_all) = avoided(&run_preset(&always, 50));
    check(
        events >= 1000 && (frac - 0.845).abs() <= 0.03 && events_all > 0 && clean_all == events_all,
        format!("avoidance {frac:.3} over {events} events; {clean_all}/{events_all} with the bounce always present"),
    )
}

fn zero_outage_mechanism() -> Outcome {
    let mut file = presets::load("blockage_concrete").map_err(|e| e.to_string())?;
    file.sim.horizon = 10.0;
    let b = file.blockers.as_mut().ok_or("preset has no blockers")?;
    b.arrival = terra_core::mobility::ArrivalLaw::Poisson;
    b.arrival_rate = 0.5;
    b.duration_jitter = 0.05;
    b.gr_availability = 1.0;
    let seeds: Vec<u64> = (100..200).collect();
    let runs = batch::run_seeds(&file, &seeds, batch::default_jobs()).map_err(|e| e.to_string())?;
    let mut events = 0;
    let mut bad = Vec::new();
    for r in &runs {
        let tr = &r.summary.trace;
        let outages = tr.outage_intervals();
        for blk in tr.blockage_intervals() {
            events += 1;
            if outages.iter().any(|&o| overlaps(o, blk)) {
                bad.push(r.seed);
            }
        }
    }
    check(
        bad.is_empty() && events > 0,
        format!(
            "{events} blockages over {} runs, overlapping outages in seeds {bad:?}",
            runs.len()
        ),
    )
}

fn tracking_overhead() -> Outcome {
    let file = presets::load("tracking_28ghz").map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..file.sim.runs as u64)
        .map(|i| file.sim.seed + i)
        .collect();
    let runs = batch::run_seeds(&file, &seeds, batch::default_jobs()).map_err(|e| e.to_string())?;
    let terra = runs
        .iter()
        .map(|r| r.summary.max_probes(ProbePurpose::Adapt))
        .max()
        .unwrap_or(0);
    let adaptations = runs
        .iter()
        .flat_map(|r| &r.summary.probe_rounds)
        .filter(|(p, _)| *p == ProbePurpose::Adapt)
        .count();
    let cb = file
        .build(file.sim.seed)
        .map_err(|e| e.to_string())?
        .mobile_codebook;
    let hier = baselines::hierarchical_measurements(&cb).map_err(|e| e.to_string())?;
    // a 4-way split of a 32x32 grid bottoms out after five levels
    let levels = (cb.len() as f64).log(4.0).round() as usize;
    check(
        adaptations > 0 && terra <= 8 && cb.len() == 1024 && hier == 4 * levels && hier == 20,
        format!(
            "TERRA {terra} over {adaptations} adaptations, exhaustive {}, hierarchical {hier}",
            cb.len()
        ),
    )
}

/// Root mean square of operating-vs-oracle gaps, computed from the raw trace.
fn rms_gap(traces: &[Trace]) -> f64 {
    use terra_core::sweep::LinkKind;
    let mut sum = 0.0;
    let mut n = 0usize;
    for tr in traces {
        let oracle: Vec<_> = tr.measurements(LinkKind::Oracle).collect();
        let operating: Vec<_> = tr.measurements(LinkKind::Operating).collect();
        for (o, p) in oracle.iter().zip(&operating) {
            assert_eq!(o.0, p.0, "oracle and operating samples are logged together");
            let d = o.4 - p.4;
            sum += d * d;
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

fn oracle_deviation() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for name in ["tracking_rot60", "tracking_rot120", "tracking_free"] {
        let file = presets::load(name).map_err(|e| e.to_string())?;
        let traces = run_preset(&file, file.sim.runs);
        let rms = rms_gap(&traces);
        let refs: Vec<&Trace> = traces.iter().collect();
        let pooled = report::concatenate(&refs);
        let lib = analysis::rms_loss_vs_oracle(&pooled).map_err(|e| e.to_string())?;
        ok &= rms <= 1.0 && (rms - lib).abs() < 1e-9;
        lines.push(format!("{name} {rms:.3} dB"));
    }
    check(ok, lines.join(", "))
}

fn dwell_counts(name: &str, runs: usize) -> Result<Vec<usize>, String> {
    let file = presets::load(name).map_err(|e| e.to_string())?;
    Ok(run_preset(&file, runs)
        .iter()
        .flat_map(|t| t.scan_dwell_counts())
        .collect())
}

fn sample_std(xs: &[usize]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<usize>() as f64 / n;
    (xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn search_counts() -> Outcome {
    let mut counts = dwell_counts("search_static", 500)?;
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        0.5 * (counts[n / 2 - 1] + counts[n / 2]) as f64
    };
    // Kolmogorov-Smirnov distance to the discrete uniform law on 1..=25
    let ks = (1..=25)
        .map(|k| {
            let emp = counts.iter().filter(|&&c| c <= k).count() as f64 / n as f64;
            (emp - k as f64 / 25.0).abs()
        })
        .fold(0.0, f64::max);
    let critical = 1.36 / (n as f64).sqrt();

    let linear = sample_std(&dwell_counts("linear_walk", 50)?);
    let rot90 = sample_std(&dwell_counts("rotational_90", 50)?);
    let rot180 = sample_std(&dwell_counts("rotational_180", 50)?);
    check(
        n == 500 && [12.0, 13.0, 14.0].contains(&median) && ks < critical && rot90 > linear && rot180 > linear,
        format!(
            "{n} trials, median {median}, KS {ks:.4} < {critical:.4}; std linear {linear:.2}, rotating {rot90:.2}/{rot180:.2}"
        ),
    )
}

/// Monte Carlo of a homogeneous PPP on the square around a disc of radius
/// `range` metres; returns (estimate, standard error) of P(count ≥ k).
fn ppp_oracle(
    lambda_km2: f64,
    range: f64,
    k: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    use rand_distr::{Distribution, Poisson};
    let side = 2.0 * range;
    let mean = lambda_km2 * side * side / 1e6;
    let law = Poisson::new(mean).unwrap();
    let mut hits = 0usize;
    for _ in 0..samples {
        let total = law.sample(rng) as usize;
        let mut inside = 0;
        for _ in 0..total {
            let (x, y): (f64, f64) = (rng.gen_range(-range..range), rng.gen_range(-range..range));
            if x * x + y * y <= range * range {
                inside += 1;
            }
        }
        if inside >= k {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}

fn density() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut product_ok = true;
    let mut products = Vec::new();
    for range in [100.0, 300.0, 500.0] {
        let area_km2 = std::f64::consts::PI * (range / 1000.0f64).powi(2);
        for i in 0..20 {
            // grid in expected visible stations from 0.25 to 9.75
            let lambda = (0.25 + 0.5 * i as f64) / area_km2;
            let closed = deployment::prob_at_least_k(lambda, range, 2);
            let (est, _) = ppp_oracle(lambda, range, 2, 100_000, &mut rng);
            let se = (closed * (1.0 - closed) / 100_000.0).sqrt().max(1e-9);
            worst = worst.max((est - closed).abs() / se);
        }
        let l = deployment::min_density(range, 0.9, 2).map_err(|e| e.to_string())?;
        let product = l * area_km2;
        product_ok &= (product - 3.8897).abs() <= 0.001;
        products.push(format!("{product:.4}"));
    }
    check(
        worst <= 3.0 && product_ok,
        format!(
            "largest deviation {worst:.2} SE, lambda*.pi.R^2 = {}",
            products.join("/")
        ),
    )
}

/// z statistic of the runs test written out from the textbook formula.
fn runs_z(signs: &[bool]) -> f64 {
    let n1 = signs.iter().filter(|&&s| s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    let runs = 1.0 + signs.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let mu = 2.0 * n1 * n2 / (n1 + n2) + 1.0;
    let var = (mu - 1.0) * (mu - 2.0) / (n1 + n2 - 1.0);
    (runs - mu) / var.sqrt()
}

fn runs_test_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 10_000;
    let mut rejected = 0;
    let mut valid = 0;
    for _ in 0..trials {
        let deltas: Vec<i64> = (0..100)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        if let Ok(r) = analysis::runs_test(&deltas) {
            valid += 1;
            if r.reject_at_95 {
                rejected += 1;
            }
        }
    }
    let rate = rejected as f64 / valid as f64;
    let alternating: Vec<i64> = (0..20).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let alt = analysis::runs_test(&alternating).map_err(|e| e.to_string())?;
    let signs: Vec<bool> = alternating.iter().map(|&d| d > 0).collect();
    let z = runs_z(&signs);
    check(
        (rate - 0.05).abs() <= 0.02 && alt.reject_at_95 && (alt.z - z).abs() < 1e-9,
        format!("rejection rate {rate:.4}; alternating z {:.3}", alt.z),
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_terra-sim");
    let mut outputs = Vec::new();
    for (tag, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = tmp.path().join(tag);
        let status = Command::new(bin)
            .args([
                "simulate",
                "blockage_gravel",
                "--runs",
                "4",
                "--seed-base",
                "3",
                "--jobs",
                jobs,
                "--out",
            ])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("simulate exited with {status}"));
        }
        outputs.push(read_dir_bytes(&out));
    }
    let files = outputs[0].len();
    check(
        files > 0 && outputs[0] == outputs[1] && outputs[0] == outputs[2],
        format!("{files} files identical across invocations and job counts"),
    )
}

fn main() {
    let checks: [Check; 10] = [
        ("blocking range", blocking_range),
        ("calibrated channel", calibrated_channel),
        ("blockage recovery", blockage_recovery),
        ("no outage behind a stored bounce", zero_outage_mechanism),
        ("tracking overhead", tracking_overhead),
        ("oracle deviation", oracle_deviation),
        ("search counts", search_counts),
        ("deployment density", density),
        ("runs test calibration", runs_test_calibration),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        let start = std::time::Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name}: {d} ({secs:.1}s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
