use std::path::PathBuf;

use lprom::experiment::{ExperimentConfig, ExperimentRegistry, Scale};

fn catalog() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_the_registry() {
    let reg = ExperimentRegistry::standard();
    let mut seen = 0;
    for id in reg.ids() {
        for (scale, tag) in [(Scale::Desk, "desk"), (Scale::Paper, "paper")] {
            let path = catalog().join(format!("{id}.{tag}.toml"));
            let shipped = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(shipped, reg.get(id).unwrap().config(scale), "{} is stale", path.display());
            shipped.validate().unwrap();
            seen += 1;
        }
    }
    let files = std::fs::read_dir(catalog()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "toml")).count();
    assert_eq!(files, seen, "configs/ holds files with no registry entry");
}

#[test]
fn toml_round_trip_preserves_every_entry() {
    let reg = ExperimentRegistry::standard();
    for id in reg.ids() {
        let cfg = reg.get(id).unwrap().config(Scale::Paper);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}
