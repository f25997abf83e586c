use si_amp::amp::Variant;
use si_amp::harness::config::LGrid;
use si_amp::harness::output::{read_roc, ROC_HEADER, SE_HEADER};
use si_amp::harness::{emit_csv, run_experiment, Preset};

#[test]
fn full_size_preset_output_follows_schema() {
    let mut d = Preset::PaperFig3.draft();
    d.num_trials = 1;
    d.se_samples = 5000;
    d.l_grid = LGrid::Range { start: -10.0, stop: 10.0, step: 0.5 };
    let spec = d.build().unwrap();
    let result = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_csv(&result, dir.path()).unwrap();

    let text = std::fs::read_to_string(&files.roc).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), ROC_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10 * 2 * 41);
    assert!(rows.iter().all(|r| r.len() == 8 && r[5] == "1"));
    let mut keys: Vec<(usize, &str, &str)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1], r[2])).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), rows.len(), "one row per (slot, variant, l)");

    let back = read_roc(&files.roc).unwrap();
    assert_eq!(back.len(), result.curves.len());
    for (a, b) in back.iter().zip(&result.curves) {
        assert_eq!((a.slot, a.variant, a.curve.trials), (b.slot, b.variant, b.curve.trials));
        for (p, q) in a.curve.points.iter().zip(&b.curve.points) {
            for (x, y) in [(p.l, q.l), (p.p_fa, q.p_fa), (p.p_md, q.p_md), (p.se_p_fa, q.se_p_fa), (p.se_p_md, q.se_p_md)] {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    let se = std::fs::read_to_string(&files.se_trace).unwrap();
    assert_eq!(se.lines().next().unwrap(), SE_HEADER.join(","));
    assert_eq!(se.lines().count(), result.se_trace.tau_sq.len() + 1);

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.metadata).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
    assert!(meta["wall_time_s"].as_f64().unwrap() > 0.0);
    assert_eq!(meta["spec"]["scenario"]["num_devices"], 4000);
}

#[test]
fn single_block_plain_amp_run() {
    let mut d = Preset::Fig3Desk.draft();
    d.num_trials = 1;
    d.num_blocks = 1;
    d.variants = vec![Variant::Nosi];
    d.se_samples = 2000;
    let result = run_experiment(&d.build().unwrap()).unwrap();
    assert_eq!(result.curves.len(), 1);
    assert_eq!(result.curves[0].curve.points.len(), 1001);
    let first = result.curves[0].curve.points.first().unwrap();
    let last = result.curves[0].curve.points.last().unwrap();
    assert!(first.p_fa >= last.p_fa && first.p_md <= last.p_md);
}

#[test]
fn seeds_change_results_and_repeat_exactly() {
    let run = |seed| {
        let mut d = Preset::Fig3Desk.draft();
        d.num_devices = 200;
        d.pilot_length = 40;
        d.num_trials = 3;
        d.se_samples = 2000;
        d.rng_seed = seed;
        run_experiment(&d.build().unwrap()).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.curves, b.curves);
    assert_eq!(a.se_trace, b.se_trace);
    assert_ne!(a.curves, c.curves);
}
