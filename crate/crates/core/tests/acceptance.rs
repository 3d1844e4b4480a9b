//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p migrent --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use migrent::catalog::{Catalog, CpuSpec};
use migrent::energy::{self, EnergyModel, PowerSample};
use migrent::fleet::{self, AnalysisSettings, DEFAULT_BIN_COUNT};
use migrent::scenarios::{self, Baseline, MachineRecord, TargetUtilization};
use migrent::synth::{self, ParamRanges};
use migrent::trace::{self, DailyMaxima, PeakConfig, PeakUtilization, UtilizationTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// 2016-06-01T00:00:00Z
const T0: i64 = 1_464_739_200;
const HOUR: i64 = 3600;
const DAY: i64 = 86_400;
const TARGETS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check, Duration); 9] = [
        ("energy model anchors", energy_anchors, Duration::from_secs(1)),
        ("linearity neutrality", linearity_neutrality, Duration::from_secs(10)),
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(60)),
        ("worked-example chain", worked_examples, Duration::from_secs(5)),
        ("hourly never beats ideal", ordering_property, Duration::from_secs(30)),
        ("fleet combined decreases with target", fleet_direction, Duration::from_secs(60)),
        ("fit round-trip", fit_round_trip, Duration::from_secs(10)),
        ("determinism", determinism, Duration::from_secs(60)),
        ("peak-utilization procedure", peak_procedure, Duration::from_secs(10)),
    ];

    let mut failed = 0;
    for (index, (name, check, budget)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *budget => Err(format!("{detail}; over the {budget:?} budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{elapsed:.2?}]", index + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail} [{elapsed:.2?}]", index + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn target(v: f64) -> TargetUtilization {
    TargetUtilization::new(v).unwrap()
}

/// Unconstrained traces: arbitrary levels and jumps, idle stretches, gaps of
/// up to 15 minutes.
fn wild_trace(rng: &mut ChaCha8Rng, id: &str) -> UtilizationTrace {
    let n = rng.random_range(2..=1000);
    let mut t = T0 + rng.random_range(0..HOUR);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let u = match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        pairs.push((t, u));
        t += rng.random_range(1..=900);
    }
    UtilizationTrace::from_pairs(id, pairs).unwrap()
}

/// Mean-reverting random walks at 20-30 s or 5-15 min cadence, the shape of
/// real monitoring data.
fn realistic_trace(rng: &mut ChaCha8Rng, id: &str) -> UtilizationTrace {
    let n = rng.random_range(200..=1000);
    let coarse = rng.random_bool(0.5);
    let level = rng.random_range(0.2..0.7);
    let noise = Normal::new(0.0, rng.random_range(0.002..0.015)).unwrap();
    let mut t = T0 + rng.random_range(0..HOUR);
    let mut u: f64 = level;
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        pairs.push((t, u));
        t += if coarse {
            rng.random_range(300..=900)
        } else {
            rng.random_range(20..=30)
        };
        u = (u + 0.05 * (level - u) + noise.sample(rng)).clamp(0.0, 1.0);
    }
    UtilizationTrace::from_pairs(id, pairs).unwrap()
}

// Independent reference implementation: piecewise-linear utilization,
// midpoint Riemann sums with ten cells per piece, pieces split at UTC hours.
mod oracle {
    use super::*;

    pub const A: f64 = 0.33;
    pub const M: f64 = 0.36;
    const CELLS: usize = 10;

    pub fn power(u: f64) -> f64 {
        A + (1.0 - A) * (M * u + (1.0 - M) * u * u)
    }

    /// `(t0, u0, t1, u1)` pieces of the interpolated trace, none crossing an hour.
    pub fn pieces(trace: &UtilizationTrace) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        for w in trace.samples().windows(2) {
            let (t0, u0) = (w[0].timestamp as f64, w[0].utilization);
            let (t1, u1) = (w[1].timestamp as f64, w[1].utilization);
            let at = |t: f64| u0 + (u1 - u0) * (t - t0) / (t1 - t0);
            let mut cuts = vec![t0];
            let mut b = (w[0].timestamp / HOUR + 1) * HOUR;
            while (b as f64) < t1 {
                cuts.push(b as f64);
                b += HOUR;
            }
            cuts.push(t1);
            for c in cuts.windows(2) {
                out.push((c[0], at(c[0]), c[1], at(c[1])));
            }
        }
        out
    }

    pub fn riemann(pieces: &[(f64, f64, f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for &(t0, u0, t1, u1) in pieces {
            let dt = (t1 - t0) / CELLS as f64;
            for k in 0..CELLS {
                let s = (k as f64 + 0.5) / CELLS as f64;
                total += f(u0 + (u1 - u0) * s) * dt;
            }
        }
        total
    }

    fn hour_of(piece: &(f64, f64, f64, f64)) -> i64 {
        (piece.0 as i64).div_euclid(HOUR)
    }

    /// Peak: trailing-window weighted mean (each sample covers the interval
    /// since its predecessor), daily maxima, nearest-rank percentile.
    pub fn peak(trace: &UtilizationTrace, config: &PeakConfig) -> f64 {
        let s = trace.samples();
        let mut by_day: BTreeMap<i64, f64> = BTreeMap::new();
        for i in 0..s.len() {
            let hi = s[i].timestamp as f64;
            let lo = hi - config.window_seconds;
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..=i {
                let end = s[j].timestamp as f64;
                let begin = if j == 0 {
                    end - (s[1].timestamp - s[0].timestamp) as f64
                } else {
                    s[j - 1].timestamp as f64
                };
                let overlap = end.min(hi) - begin.max(lo);
                if overlap > 0.0 {
                    num += overlap * s[j].utilization;
                    den += overlap;
                }
            }
            let smoothed = num / den;
            let day = s[i].timestamp.div_euclid(DAY);
            let slot = by_day.entry(day).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(smoothed);
        }
        let mut maxima: Vec<f64> = by_day.into_values().collect();
        maxima.sort_by(f64::total_cmp);
        let p = config.percentile as usize;
        let rank = (p * maxima.len()).div_ceil(100).max(1);
        maxima[rank - 1]
    }

    pub struct Fractions {
        pub lift_and_shift: f64,
        pub static_resize: f64,
        pub combined: f64,
        pub ideal: f64,
        pub hourly: f64,
        pub ideal_vs_static: f64,
        pub hourly_vs_static: f64,
    }

    pub fn fractions(trace: &UtilizationTrace, on_prem: &CpuSpec, cloud: &CpuSpec, u_t: f64, config: &PeakConfig) -> Fractions {
        let pieces = pieces(trace);
        let baseline = riemann(&pieces, power);
        let lift = (on_prem.spec_score / on_prem.tdp_watts) / (cloud.spec_score / cloud.tdp_watts);
        let c = peak(trace, config) / u_t;
        let resized = riemann(&pieces, |u| power((u / c).min(1.0)) * c);
        let ideal = power(u_t) / u_t * riemann(&pieces, |u| u);

        let mut hours: BTreeMap<i64, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
        for p in &pieces {
            hours.entry(hour_of(p)).or_default().push(*p);
        }
        let hourly: f64 = hours
            .values()
            .map(|hp| {
                let top = hp.iter().map(|p| p.1.max(p.3)).fold(0.0, f64::max);
                let c_h = top / u_t;
                if c_h == 0.0 {
                    0.0
                } else {
                    riemann(hp, |u| power(u / c_h) * c_h)
                }
            })
            .sum();

        Fractions {
            lift_and_shift: lift,
            static_resize: resized / baseline,
            combined: lift * resized / baseline,
            ideal: ideal / baseline,
            hourly: hourly / baseline,
            ideal_vs_static: ideal / resized,
            hourly_vs_static: hourly / resized,
        }
    }
}

fn energy_anchors() -> Result<String, String> {
    let model = EnergyModel::default();
    let (e0, e1, e_half) = (model.relative_power(0.0), model.relative_power(1.0), model.relative_power(0.5));
    ensure(e0 == 0.33, || format!("E(0) = {e0}"))?;
    ensure(e1 == 1.0, || format!("E(1) = {e1}"))?;
    ensure((e_half - 0.5578).abs() <= 1e-4, || format!("E(0.5) = {e_half}"))?;
    Ok(format!("E(0)={e0}, E(1)={e1}, E(0.5)={e_half:.6}"))
}

fn linearity_neutrality() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = EnergyModel::proportional();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let trace = wild_trace(&mut rng, "lin");
        let max = trace.max_utilization();
        if max == 0.0 {
            continue;
        }
        // A peak at or above every sample keeps u/c <= u_T, so no clamp.
        let peak = PeakUtilization::new(rng.random_range(max..=1.0)).unwrap();
        let u_t = target(rng.random_range(0.05..=1.0));
        let f = scenarios::static_resize_fraction(&trace, u_t, &model, peak).map_err(|e| e.to_string())?;
        worst = worst.max((f - 1.0).abs());
        checked += 1;
    }
    ensure(worst <= 1e-9, || format!("max |fraction - 1| = {worst:e}"))?;
    Ok(format!("{checked} traces, max |fraction - 1| = {worst:.1e}"))
}

fn oracle_equivalence() -> Result<String, String> {
    let catalog = Catalog::fixture();
    let model = EnergyModel::default();
    let config = PeakConfig {
        min_days: 1,
        ..PeakConfig::default()
    };
    let on_prem_names: Vec<&str> = catalog.iter().filter(|c| !c.cloud).map(|c| c.model_name.as_str()).collect();
    let targets: Vec<TargetUtilization> = TARGETS.iter().map(|&t| target(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = (0.0_f64, String::new());

    for i in 0..100 {
        let trace = realistic_trace(&mut rng, &format!("m{i}"));
        let cpu = on_prem_names[i % on_prem_names.len()];
        let machine = MachineRecord::new(trace, cpu, "dc");
        let report = scenarios::analyze_machine(&machine, &targets, &model, &catalog, Baseline::LiftAndShift, &config)
            .map_err(|e| format!("m{i}: {e}"))?;
        ensure(!report.idle_machine, || format!("m{i} unexpectedly idle"))?;
        let on_prem = catalog.lookup(cpu).unwrap();
        for row in &report.targets {
            let o = oracle::fractions(&machine.trace, on_prem, catalog.cloud_reference(), row.target, &config);
            let by_static = row.autoscale_by_baseline.static_resized.unwrap();
            let pairs = [
                ("lift_and_shift", row.lift_and_shift, o.lift_and_shift),
                ("static_resize", row.static_resize.unwrap(), o.static_resize),
                ("combined", row.combined.unwrap(), o.combined),
                ("autoscale_ideal", row.autoscale_ideal.unwrap(), o.ideal),
                ("autoscale_hourly", row.autoscale_hourly.unwrap(), o.hourly),
                ("autoscale_ideal/static", by_static.ideal, o.ideal_vs_static),
                ("autoscale_hourly/static", by_static.hourly, o.hourly_vs_static),
            ];
            for (name, got, want) in pairs {
                let rel = ((got - want) / want).abs();
                if rel > worst.0 {
                    worst = (rel, format!("m{i} {name} at {}: {got} vs {want}", row.target));
                }
            }
        }
    }
    ensure(worst.0 <= 1e-3, || format!("worst relative error {:e} ({})", worst.0, worst.1))?;
    Ok(format!("100 traces x 5 targets, worst relative error {:.1e}", worst.0))
}

fn worked_examples() -> Result<String, String> {
    let catalog = Catalog::fixture();
    let model = EnergyModel::default();
    let config = PeakConfig::default();

    let constant = UtilizationTrace::from_pairs("const", (0..=8 * DAY / 300).map(|i| (T0 + i * 300, 0.4))).unwrap();
    let machine = MachineRecord::new(constant, "Xeon-E5-2670", "dc");
    let report = scenarios::analyze_machine(&machine, &[target(0.8)], &model, &catalog, Baseline::LiftAndShift, &config)
        .map_err(|e| e.to_string())?;
    let resized = report.targets[0].static_resize.unwrap();
    let on_prem = catalog.lookup("Xeon-E5-2670").unwrap();
    let oracle_resized = oracle::fractions(&machine.trace, on_prem, catalog.cloud_reference(), 0.8, &config).static_resize;
    ensure((resized - 0.80530).abs() <= 1e-4, || format!("static_resize {resized}"))?;
    ensure((oracle_resized - 0.80530).abs() <= 1e-4, || format!("oracle static_resize {oracle_resized}"))?;

    let two_level =
        UtilizationTrace::from_pairs("two", [(T0, 0.2), (T0 + 1800, 0.2), (T0 + 1801, 0.8), (T0 + 3601, 0.8)]).unwrap();
    let peak = PeakUtilization::new(0.8).unwrap();
    let ideal = scenarios::autoscale_ideal_fraction(&two_level, target(0.8), &model, Baseline::LiftAndShift, peak)
        .map_err(|e| e.to_string())?;
    let min_one = PeakConfig { min_days: 1, ..config };
    let oracle_ideal = oracle::fractions(&two_level, on_prem, catalog.cloud_reference(), 0.8, &min_one).ideal;
    ensure((ideal - 0.83564).abs() <= 1e-4, || format!("autoscale_ideal {ideal}"))?;
    ensure((oracle_ideal - 0.83564).abs() <= 1e-4, || format!("oracle autoscale_ideal {oracle_ideal}"))?;

    Ok(format!(
        "static_resize {resized:.6} (oracle {oracle_resized:.6}), autoscale_ideal {ideal:.6} (oracle {oracle_ideal:.6})"
    ))
}

fn ordering_property() -> Result<String, String> {
    let model = EnergyModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let targets = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85];
    let peak = PeakUtilization::new(1.0).unwrap();
    let mut closest = f64::INFINITY;
    let mut checked = 0;
    while checked < 500 {
        let trace = if checked % 2 == 0 {
            wild_trace(&mut rng, "ord")
        } else {
            realistic_trace(&mut rng, "ord")
        };
        if trace.max_utilization() == 0.0 {
            continue;
        }
        let u_t = target(targets[checked % targets.len()]);
        let ideal = scenarios::autoscale_ideal_fraction(&trace, u_t, &model, Baseline::LiftAndShift, peak)
            .map_err(|e| e.to_string())?;
        let hourly = scenarios::autoscale_hourly_fraction(&trace, u_t, &model, Baseline::LiftAndShift, peak)
            .map_err(|e| e.to_string())?;
        ensure(hourly >= ideal - 1e-9, || {
            format!("trace {checked} at {}: hourly {hourly} < ideal {ideal}", u_t.value())
        })?;
        closest = closest.min(hourly - ideal);
        checked += 1;
    }
    Ok(format!("{checked} traces, min(hourly - ideal) = {closest:.3e}"))
}

fn fleet_direction() -> Result<String, String> {
    let catalog = Catalog::fixture();
    let fleet = synth::generate_fleet(6, 200, 10, &ParamRanges::default(), &catalog).map_err(|e| e.to_string())?;
    let outcomes = fleet::analyze_machines(&fleet.records(), &catalog, &AnalysisSettings::default(), None);
    let report = fleet::aggregate(outcomes, &catalog, DEFAULT_BIN_COUNT).map_err(|e| e.to_string())?;
    ensure(report.machine_count == 200, || format!("{} machines analyzed", report.machine_count))?;
    let means: Vec<f64> = report
        .mean_table
        .iter()
        .map(|row| row.machine_mean.combined.unwrap())
        .collect();
    ensure(means.windows(2).all(|w| w[1] < w[0]), || format!("combined means {means:?}"))?;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    Ok(format!("mean combined across 0.5..0.9: {}", shown.join(" > ")))
}

fn fit_round_trip() -> Result<String, String> {
    let truth = EnergyModel::default();
    let samples: Vec<PowerSample> = (0..=10)
        .map(|i| {
            let u = i as f64 / 10.0;
            PowerSample::new(u, truth.relative_power(u))
        })
        .collect();
    let fitted = energy::fit(&samples).map_err(|e| e.to_string())?;
    let (a, m) = (fitted.idle_fraction(), fitted.linear_mix());
    ensure((a - 0.33).abs() <= 1e-3 && (m - 0.36).abs() <= 1e-3, || format!("fit a={a}, m={m}"))?;
    Ok(format!("a={a:.5}, m={m:.5}"))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn migrent(args: &[&str]) -> Vec<u8> {
    let output = Command::new(env!("CARGO_BIN_EXE_migrent")).args(args).output().unwrap();
    assert!(
        output.status.success(),
        "migrent {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output.stdout
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    for dir in [&first, &second] {
        let dir = dir.to_str().unwrap();
        migrent(&["synth", "--seed", "42", "--machines", "12", "--datacenters", "3", "--days", "8", "--out", dir]);
    }
    let (a, b) = (read_tree(&first), read_tree(&second));
    ensure(a.len() == 13, || format!("{} synth files", a.len()))?;
    ensure(a == b, || "synth output differs between runs".into())?;

    let manifest = first.join("manifest.csv");
    let manifest = manifest.to_str().unwrap();
    let run1 = migrent(&["fleet", manifest, "--jobs", "1"]);
    let run2 = migrent(&["fleet", manifest, "--jobs", "3"]);
    ensure(run1 == run2, || "fleet JSON differs between runs".into())?;
    Ok(format!("{} synth files and {} bytes of fleet JSON identical", a.len(), run1.len()))
}

fn peak_procedure() -> Result<String, String> {
    // Twenty daily maxima 0.05, 0.10, ..., 1.00, presented out of order.
    let mut values: Vec<u32> = (1..=20).collect();
    values.reverse();
    values.swap(3, 11);
    let days = values
        .iter()
        .enumerate()
        .map(|(d, &v)| {
            let date = chrono::DateTime::from_timestamp(T0 + d as i64 * DAY, 0).unwrap().date_naive();
            (date, f64::from(v) / 20.0)
        })
        .collect();
    let peak = trace::peak_utilization(&DailyMaxima { days }, 95.0, 7).map_err(|e| e.to_string())?;
    ensure(peak.value() == 0.95, || format!("peak {}", peak.value()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    while checked < 1000 {
        let trace = wild_trace(&mut rng, "smooth");
        let window = rng.random_range(1.0..=3600.0);
        let smoothed = trace::smooth(&trace, window).map_err(|e| e.to_string())?;
        let (lo, hi) = (trace.min_utilization(), trace.max_utilization());
        for s in smoothed.samples() {
            ensure((0.0..=1.0).contains(&s.utilization) && s.utilization >= lo && s.utilization <= hi, || {
                format!("smoothed value {} outside [{lo}, {hi}]", s.utilization)
            })?;
        }
        checked += 1;
    }
    Ok(format!("peak {}, {checked} smoothed traces within [0, 1]", peak.value()))
}
