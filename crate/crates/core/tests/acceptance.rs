//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

use std::time::Instant;

use spinent::entanglement::{
    concurrence_from_susceptibility, concurrence_x_form, find_threshold, genuine_tripartite_bound, pair_concurrence,
    PairState, ScanOptions,
};
use spinent::experiment::{extract, synthesize_dataset, ExtractionOptions};
use spinent::report::{zero_field_report, ReportOptions};
use spinent::sweep::{ground_state_crossing_fields, run_ht_sweep};
use spinent::thermal::{subsystem_susceptibility, subsystem_susceptibility_axis, ThermalModel};
use spinent::{Axis, ClusterSpec};

type Check = Result<String, String>;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
        .collect()
}

fn within(name: &str, v: f64, lo: f64, hi: f64) -> Check {
    if (lo..=hi).contains(&v) {
        Ok(format!("{name} = {v:.3}, band [{lo}, {hi}]"))
    } else {
        Err(format!("{name} = {v:.3} outside [{lo}, {hi}]"))
    }
}

fn preset() -> ClusterSpec {
    ClusterSpec::na2cu5si4o14()
}

fn report() -> spinent::report::ZeroFieldThresholds {
    zero_field_report(&preset(), &ReportOptions::default()).expect("zero-field report").thresholds
}

fn ac1() -> Check {
    let start = Instant::now();
    let model = ThermalModel::new(&preset(), 0.0).map_err(|e| e.to_string())?;
    let th = find_threshold(
        "ef_12",
        |t| Ok(pair_concurrence(&model.state(t)?, 0, 1)?.margin),
        1.0,
        400.0,
        ScanOptions::temperature().with_tolerance(1e-4),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let t = th.value().ok_or("EF(1-2) never vanishes")?;
    let line = within("T(EF12 = 0)", t, 170.0, 230.0)?;
    if elapsed >= 10.0 {
        return Err(format!("{line}; took {elapsed:.2} s"));
    }
    Ok(format!("{line}; {elapsed:.3} s"))
}

fn ac2() -> Check {
    within("T(EW3 = 0)", report().t_ew3.ok_or("no EW3 threshold")?, 204.0, 276.0)
}

fn ac3() -> Check {
    within("T(EW5 = 0)", report().t_ew5.ok_or("no EW5 threshold")?, 93.0, 127.0)
}

fn ac4() -> Check {
    let th = report();
    let bound = genuine_tripartite_bound(spinent::model::J_TRIMER);
    if (bound - (-181.95)).abs() > 0.05 {
        return Err(format!("bound {bound} does not match -181.95 to 4 significant figures"));
    }
    let line = within("T(<H_tri> = bound)", th.t_genuine.ok_or("no genuine threshold")?, 92.0, 124.0)?;
    Ok(format!("{line}; bound {bound:.4} K"))
}

fn ac5() -> Check {
    let ts = linspace(1.0, 400.0, 80);
    let hs = linspace(0.0, 1e4, 21);
    let grid = run_ht_sweep(&preset(), &ts, &hs, None).map_err(|e| e.to_string())?;
    if !grid.failures.is_empty() {
        return Err(format!("{} failed cells", grid.failures.len()));
    }
    let mut min_ew2 = f64::INFINITY;
    let mut max_c45 = 0.0f64;
    for (ti, _) in ts.iter().enumerate() {
        for (hi, _) in hs.iter().enumerate() {
            let c = grid.cell(ti, hi).expect("complete grid");
            min_ew2 = min_ew2.min(c.ew2);
            max_c45 = max_c45.max(c.ef_45);
        }
    }
    let line = format!("min EW2 = {min_ew2:.4}, max EF45 = {max_c45} over {}×{} grid", ts.len(), hs.len());
    if min_ew2 >= 0.0 && max_c45 == 0.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac6() -> Check {
    let spec = preset();
    let zero = ThermalModel::new(&spec, 0.0).map_err(|e| e.to_string())?;
    for t in linspace(1.0, 400.0, 400) {
        let c = pair_concurrence(&zero.state(t).map_err(|e| e.to_string())?, 0, 2).map_err(|e| e.to_string())?;
        if c.ef != 0.0 {
            return Err(format!("zero-field EF13 = {} at {t} K", c.ef));
        }
    }
    let crossings = ground_state_crossing_fields(&spec, 1e8).map_err(|e| e.to_string())?;
    let h_cross = *crossings.fields_oe.last().ok_or("no crossing field")?;
    let mut best = (0.0, 0.0);
    for k in 1..200 {
        let h = h_cross * k as f64 / 200.0;
        let model = ThermalModel::new(&spec, h).map_err(|e| e.to_string())?;
        let ef = pair_concurrence(&model.state(1.0).map_err(|e| e.to_string())?, 0, 2)
            .map_err(|e| e.to_string())?
            .ef;
        if ef > best.1 {
            best = (h, ef);
        }
    }
    let line = format!(
        "EF13 = 0 for T in [1, 400] K at H = 0; at 1 K max EF13 = {:.4} at {:.0} Oe (< crossing {:.0} Oe)",
        best.1, best.0, h_cross
    );
    if best.1 > 0.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac7() -> Check {
    let spec = preset();
    let model = ThermalModel::new(&spec, 0.0).map_err(|e| e.to_string())?;
    let (mut d8, mut d7) = (0.0f64, 0.0f64);
    for t in linspace(1.0, 400.0, 199) {
        let state = model.state(t).map_err(|e| e.to_string())?;
        for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4)] {
            let pair = PairState::from_state(&state, i, j).map_err(|e| e.to_string())?;
            let w = pair_concurrence(&state, i, j).map_err(|e| e.to_string())?.concurrence;
            let x = concurrence_x_form(&pair).map_err(|e| e.to_string())?.concurrence;
            let chi = subsystem_susceptibility(&state, &[i, j]).map_err(|e| e.to_string())?;
            let s = concurrence_from_susceptibility(chi, t).map_err(|e| e.to_string())?.concurrence;
            d8 = d8.max((w - s).abs());
            d7 = d7.max((w - x).abs());
        }
    }
    let line = format!("max |C_W - C_chi| = {d8:.2e}, max |C_W - C_X| = {d7:.2e} over 199 temperatures");
    if d8 < 1e-8 && d7 < 1e-10 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac8() -> Check {
    let spec = ClusterSpec::pair(-1.0).map_err(|e| e.to_string())?;
    let model = ThermalModel::new(&spec, 0.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for t in linspace(0.1, 5.0, 491) {
        let c = pair_concurrence(&model.state(t).map_err(|e| e.to_string())?, 0, 1)
            .map_err(|e| e.to_string())?
            .concurrence;
        let x = (1.0 / t).exp();
        worst = worst.max((c - ((x - 3.0) / (x + 3.0)).max(0.0)).abs());
    }
    let th = find_threshold(
        "c",
        |t| Ok(pair_concurrence(&model.state(t)?, 0, 1)?.margin),
        0.1,
        5.0,
        ScanOptions::temperature().with_tolerance(1e-5),
    )
    .map_err(|e| e.to_string())?
    .value()
    .ok_or("no threshold")?;
    let exact = 1.0 / 3f64.ln();
    let line = format!("max |ΔC| = {worst:.2e}; threshold {th:.5} K vs 1/ln 3 = {exact:.5} K");
    if worst < 1e-10 && (th - exact).abs() < 1e-3 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac9() -> Check {
    let spec = preset();
    let model = ThermalModel::new(&spec, 0.0).map_err(|e| e.to_string())?;
    let t = 1e5;
    let tchi = t * model.chi_total(t).map_err(|e| e.to_string())?;
    let all = spec.all_sites();
    let mut spread = 0.0f64;
    for t in linspace(1.0, 400.0, 100) {
        let s = model.state(t).map_err(|e| e.to_string())?;
        let v: Vec<f64> = Axis::ALL
            .iter()
            .map(|&a| subsystem_susceptibility_axis(&s, &all, a))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        spread = spread.max((v[0] - v[1]).abs()).max((v[1] - v[2]).abs()).max((v[0] - v[2]).abs());
    }
    let line = format!("T·χ̃(1e5 K) = {tchi:.6}; max per-axis spread at H = 0: {spread:.2e}");
    if (tchi - 1.25).abs() < 1e-3 && spread < 1e-10 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac10() -> Check {
    let spec = preset();
    let grid: Vec<f64> = (0..=392).map(|k| 8.0 + k as f64).collect();
    let data = synthesize_dataset(&spec, &grid, 100.0, 0.0, 0).map_err(|e| e.to_string())?;
    let r = extract(&spec, &data, &ExtractionOptions::default()).map_err(|e| e.to_string())?;
    let zero = ThermalModel::new(&spec, 0.0).map_err(|e| e.to_string())?;
    let ef12 = r.pair_ef.iter().find(|e| e.name == "ef_12").ok_or("no ef_12 series")?;
    let mut worst = 0.0f64;
    for (k, &t) in ef12.temperatures.iter().enumerate() {
        if t < 10.0 {
            continue;
        }
        let theory = pair_concurrence(&zero.state(t).map_err(|e| e.to_string())?, 0, 1)
            .map_err(|e| e.to_string())?
            .ef;
        worst = worst.max((ef12.ef[k] - theory).abs());
    }
    let th = report();
    let mut deltas = Vec::new();
    for (name, expected) in [("ef_12", th.t_ef_pair), ("ew_trimer", th.t_ew3), ("ew_total", th.t_ew5)] {
        let got = r.threshold(name).and_then(|t| t.value()).ok_or(format!("{name}: no threshold"))?;
        deltas.push((got - expected.ok_or("missing theory threshold")?).abs());
    }
    let max_dt = deltas.iter().cloned().fold(0.0, f64::max);
    let line = format!("max |ΔEF12| = {worst:.2e} on 10-400 K; max threshold shift {max_dt:.3} K");
    if worst < 1e-6 && max_dt < 1.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac11() -> Check {
    let spec = preset();
    let ts = linspace(1.0, 400.0, 50);
    let hs = linspace(0.0, 1e4, 50);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let start = Instant::now();
    let parallel = run_ht_sweep(&spec, &ts, &hs, Some(workers)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let serial = run_ht_sweep(&spec, &ts, &hs, Some(1)).map_err(|e| e.to_string())?;
    let identical = parallel.to_csv_string() == serial.to_csv_string()
        && parallel.to_json_string() == serial.to_json_string();
    let line = format!("50×50 sweep on {workers} workers: {elapsed:.2} s; identical to 1 worker: {identical}");
    if elapsed < 60.0 && identical {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ac12() -> Check {
    let spec = preset();
    let r = ground_state_crossing_fields(&spec, 1e8).map_err(|e| e.to_string())?;
    let fields: Vec<String> = r.fields_oe.iter().map(|h| format!("{h:.1}")).collect();
    let line = format!(
        "computed crossing fields (g = {}): [{}] Oe, S^z {:?}",
        r.g_factor,
        fields.join(", "),
        r.ground_labels
    );
    let ordered = r.fields_oe.windows(2).all(|w| w[1] > w[0]);
    if !r.fields_oe.is_empty() && ordered && r.ground_labels.last() == Some(&2.5) && r.g_factor == spec.g_factor() {
        Ok(line)
    } else {
        Err(line)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("AC1 pair EF threshold", ac1),
        ("AC2 trimer witness threshold", ac2),
        ("AC3 total witness threshold", ac3),
        ("AC4 genuine tripartite threshold", ac4),
        ("AC5 dimer separability", ac5),
        ("AC6 pair 1-3 field-induced EF", ac6),
        ("AC7 concurrence method agreement", ac7),
        ("AC8 analytic two-spin oracle", ac8),
        ("AC9 Curie asymptote and isotropy", ac9),
        ("AC10 pipeline closure", ac10),
        ("AC11 parallel determinism", ac11),
        ("AC12 computed field scales", ac12),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
