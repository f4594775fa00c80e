//! The bundled data sets are reproducible from `bundled_config`, and the
//! classifier reads them the expected way. Set `IRB_LAB_REGENERATE=1` to
//! rewrite the files instead of comparing.

use std::path::PathBuf;

use irb_core::modelsel::Verdict;
use irb_lab::{
    alpha_csv, bundled_config, bundled_epsilons, bundled_inputs, cmd_classify, cmd_irb, ExperimentConfig, Results,
};

const FILES: [&str; 3] = ["eps_0.csv", "eps_pi_256.csv", "eps_pi_128.csv"];

#[test]
fn bundled_files_regenerate() {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let regenerate = std::env::var_os("IRB_LAB_REGENERATE").is_some();
    for (eps, file) in bundled_epsilons().into_iter().zip(FILES) {
        let outcome = cmd_irb(&bundled_config(eps)).unwrap();
        let text = alpha_csv(&outcome).unwrap();
        let path = data.join(file);
        if regenerate {
            std::fs::write(&path, &text).unwrap();
        } else {
            assert_eq!(std::fs::read_to_string(&path).unwrap(), text, "{file} is stale");
        }
    }
}

#[test]
fn bundled_classification_pattern() {
    let inputs = bundled_inputs().unwrap();
    let outcome = cmd_classify(&ExperimentConfig::default(), &inputs).unwrap();
    let Results::Classify { cases, .. } = &outcome.report.results else {
        panic!("wrong result kind")
    };
    assert_eq!(cases.len(), 3);
    assert_eq!(cases[0].report.verdict, Verdict::NonUnitary);
    assert!(cases[1].report.verdict.has_coherent_part());
    assert!(cases[2].report.verdict.has_coherent_part());
}
