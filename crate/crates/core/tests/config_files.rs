use std::path::Path;

use si_amp::amp::Variant;
use si_amp::harness::config::{parse_draft, GainSource};
use si_amp::harness::{parse_config, Preset};
use si_amp::model::PhysicalLayout;
use si_amp::Error;

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn shipped_configs_parse() {
    let desk = parse_config(&shipped("desk.toml")).unwrap();
    assert_eq!(desk, {
        let mut d = Preset::Fig3Desk.draft();
        d.out_dir = "out/desk".into();
        d.build().unwrap()
    });
    assert_eq!(desk.l_grid.len(), 1001);
    assert_eq!(desk.gain_source, GainSource::Physical(PhysicalLayout::default()));

    let fig4 = parse_config(&shipped("full-fig4.toml")).unwrap();
    assert_eq!((fig4.scenario.num_devices, fig4.scenario.pilot_length, fig4.scenario.num_antennas), (4000, 500, 2));
    assert_eq!(fig4.num_trials, 50);

    let common = parse_config(&shipped("common-gain.toml")).unwrap();
    assert_eq!(common.scenario.path_losses, vec![1.0; 400]);
    assert_eq!(common.l_grid, vec![-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0]);
    assert_eq!(common.variants, vec![Variant::Si, Variant::Nosi]);
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(parse_config(Path::new("/nonexistent/x.toml")), Err(Error::Io { .. })));
}

#[test]
fn wrong_type_reports_line() {
    let text = "[scenario]\nnum_devices = 10\n\nnum_blocks = \"five\"\n";
    match parse_draft(text, Path::new("t.toml")) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, Some(4));
            assert!(message.contains("invalid type"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_preset_is_rejected() {
    assert!(matches!(parse_draft("preset = \"fig9\"\n", Path::new("t.toml")), Err(Error::Parse { .. })));
}

#[test]
fn physical_layout_violations_are_listed() {
    let text = "[scenario.gains.physical]\nmin_radius_km = 2.0\nbandwidth_hz = 0.0\n[experiment]\nparallelism = 0\n";
    match parse_draft(text, Path::new("t.toml")).unwrap().build() {
        Err(Error::Validation(v)) => {
            assert_eq!(v.len(), 3, "{v:?}");
        }
        other => panic!("{other:?}"),
    }
}
