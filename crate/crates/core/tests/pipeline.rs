use dchoice_core::hv::{classical_max_linear, LinearWitness};
use dchoice_core::scenario::{probability_table, raw_probability_table};
use dchoice_core::trials::{bootstrap_report, estimate, sample, CountTable, RunPlan, SettingOrder};
use dchoice_core::witness::{dimension_witness, retrocausality};
use dchoice_core::{Scenario, WitnessReport};

#[test]
fn scenario_json_round_trip() {
    let text = r#"{"alphas_pi": [0.25, 0.75, -0.5], "betas_pi": [0.5, 0.0], "visibility": 0.9}"#;
    let s: Scenario = serde_json::from_str(text).unwrap();
    assert_eq!(
        s,
        Scenario::dimension_witness_settings()
            .with_visibility(0.9)
            .unwrap()
    );
    let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
    assert!(serde_json::from_str::<Scenario>(
        r#"{"alphas_pi": [0], "betas_pi": [0], "visibility": 1.5}"#
    )
    .is_err());
}

#[test]
fn sampled_run_through_csv_matches_analytic() {
    let s = Scenario::dimension_witness_settings()
        .with_visibility(0.95)
        .unwrap()
        .with_efficiency(0.5)
        .unwrap()
        .with_fair_sampling(true);
    let plan = RunPlan::new(200_000, 11, SettingOrder::RandomPerTrial).unwrap();
    let counts = sample(&raw_probability_table(&s).unwrap(), &plan);

    let mut buf = Vec::new();
    counts.write_csv(&mut buf).unwrap();
    let counts = CountTable::read_csv(buf.as_slice()).unwrap();

    let report = bootstrap_report(&counts, 500, 1, true).unwrap();
    let se = report.uncertainties.as_ref().unwrap().i_dw_se.unwrap();
    let truth = dimension_witness(&probability_table(&s).unwrap()).unwrap();
    let point = dimension_witness(&estimate(&counts, true).unwrap()).unwrap();
    assert_eq!(report.i_dw, Some(point));
    assert!(
        (point - truth).abs() < 4.0 * se,
        "{point} ± {se} vs {truth}"
    );
    assert!(report.sigma_idw.unwrap() > 10.0);
}

#[test]
fn quantum_beats_every_classical_strategy() {
    let classical = classical_max_linear(&LinearWitness::dimension_witness(), 2).unwrap();
    let quantum = WitnessReport::analytic(
        &probability_table(&Scenario::dimension_witness_settings()).unwrap(),
    );
    assert!(quantum.i_dw.unwrap() > classical.value);
    assert_eq!(retrocausality(classical.value), 0.0);
}
