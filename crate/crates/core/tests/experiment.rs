use sbm_spectral::clustering::Algorithm;
use sbm_spectral::experiment::{
    read_records, run_experiment, run_replication, summarize_table, write_records, Exclusion,
    ExperimentConfig, ExperimentRecord, Pipeline, TauMode, CSV_HEADER,
};
use sbm_spectral::laplacian::Variant;
use sbm_spectral::par::Exec;
use sbm_spectral::Error;

fn quick(dgp: u8, npk: usize, reps: u64, pipelines: Vec<Pipeline>, mode: TauMode) -> ExperimentConfig {
    ExperimentConfig {
        dgp,
        n_per_community: npk,
        reps,
        seed: 77,
        pipelines,
        algorithm: Algorithm::KMeans,
        tau_mode: mode,
        restarts: 5,
        no_timing: true,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(records: &[ExperimentRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).unwrap();
    buf
}

#[test]
fn replication_is_deterministic() {
    let cfg = quick(4, 40, 1, vec![Pipeline::Single(Variant::TauPrime), Pipeline::Adaptive], TauMode::Jy);
    assert_eq!(run_replication(&cfg, 4).unwrap(), run_replication(&cfg, 4).unwrap());
    assert_ne!(run_replication(&cfg, 4).unwrap(), run_replication(&cfg, 5).unwrap());
}

#[test]
fn csv_identical_across_execution_modes() {
    let cfg = quick(1, 25, 6, vec![Pipeline::Single(Variant::Plain), Pipeline::Single(Variant::Tau)], TauMode::Dbar);
    let seq = run_experiment(&cfg, Exec::Sequential).unwrap();
    let par = run_experiment(&cfg, Exec::default()).unwrap();
    assert_eq!(csv_bytes(&seq.records), csv_bytes(&par.records));
    let reps: Vec<u64> = seq.records.iter().map(|r| r.rep).collect();
    let mut sorted = reps.clone();
    sorted.sort_unstable();
    assert_eq!(reps, sorted);
}

#[test]
fn single_rep_summary_equals_record() {
    let cfg = quick(1, 40, 1, vec![Pipeline::Single(Variant::Tau)], TauMode::Dbar);
    let out = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(out.records.len(), 1);
    let (r, s) = (&out.records[0], &out.summary[0]);
    assert_eq!(s.mean_ccp, r.ccp.unwrap());
    assert_eq!(s.mean_nmi, r.nmi.unwrap());
    assert_eq!(s.mean_tau, r.tau.unwrap());
    assert_eq!((s.included, s.total), (1, 1));
}

#[test]
fn jy_record_is_well_formed() {
    let cfg = quick(1, 200, 1, vec![Pipeline::Single(Variant::Tau)], TauMode::Jy);
    let recs = run_replication(&cfg, 0).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!((r.n, r.k, r.variant.as_str(), r.excluded), (400, 2, "tau", Exclusion::No));
    assert!(r.tau.unwrap() > 0.0);
    for m in [r.ccp.unwrap(), r.nmi.unwrap()] {
        assert!((0.0..=1.0).contains(&m));
    }
}

#[test]
fn grid_scan_gives_one_row_per_grid_point() {
    let cfg = quick(1, 30, 2, vec![Pipeline::Single(Variant::Tau)], TauMode::Grid);
    let out = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(out.records.len(), 40);
    assert_eq!(out.summary.len(), 20);
    let slots: Vec<usize> = out.summary.iter().map(|s| s.slot).collect();
    assert_eq!(slots, (0..20).collect::<Vec<_>>());
    // Grid slots are increasing in τ on every replication.
    for w in out.summary.windows(2) {
        assert!(w[0].mean_tau < w[1].mean_tau);
    }
}

#[test]
fn summary_recomputed_from_csv() {
    let cfg = quick(1, 20, 12, vec![Pipeline::Single(Variant::Plain), Pipeline::Single(Variant::TauPrime)], TauMode::Dbar4);
    let out = run_experiment(&cfg, Exec::Sequential).unwrap();
    let back = read_records(csv_bytes(&out.records).as_slice()).unwrap();
    assert_eq!(back, out.records);
    // Independent fold over the parsed rows.
    for row in &out.summary {
        let mine: Vec<&ExperimentRecord> = back.iter().filter(|r| r.variant == row.variant).collect();
        let inc: Vec<&&ExperimentRecord> = mine.iter().filter(|r| r.excluded == Exclusion::No).collect();
        let mean = inc.iter().map(|r| r.ccp.unwrap()).sum::<f64>() / inc.len() as f64;
        let nmi = inc.iter().map(|r| r.nmi.unwrap()).sum::<f64>() / inc.len() as f64;
        assert!((mean - row.mean_ccp).abs() < 1e-12);
        assert!((nmi - row.mean_nmi).abs() < 1e-12);
        let zero = mine.iter().filter(|r| r.excluded == Exclusion::ZeroDegree).count();
        assert!((row.ratio - (1.0 - zero as f64 / mine.len() as f64)).abs() < 1e-12);
    }
    let plain = out.summary.iter().find(|s| s.variant == "plain").unwrap();
    assert!(plain.ratio < 1.0, "n/K=20 should produce isolated nodes");
    for r in back.iter().filter(|r| r.excluded == Exclusion::ZeroDegree) {
        assert!(r.ccp.is_none() && r.nmi.is_none());
    }
}

#[test]
fn header_is_exact() {
    let buf = csv_bytes(&[]);
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(read_records("rep,dgp\n".as_bytes()).is_err());
}

#[test]
fn standard_error_scales_with_square_root_of_reps() {
    // Spread of the mean CCP over independent seeds, at R and 4R replications.
    fn spread(reps: u64, trials: u64) -> f64 {
        let means: Vec<f64> = (0..trials)
            .map(|t| {
                let mut cfg = quick(1, 50, reps, vec![Pipeline::Single(Variant::TauPrime)], TauMode::Fixed(0.5));
                cfg.seed = 1000 + t;
                cfg.restarts = 3;
                let out = run_experiment(&cfg, Exec::default()).unwrap();
                out.summary[0].mean_ccp
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
    }
    let ratio = spread(4, 80) / spread(16, 80);
    assert!((ratio - 2.0).abs() <= 0.6, "ratio {ratio}");
}

#[test]
fn config_file_and_overrides() {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_file("# comment\ndgp = 3\nn_per_k=120\nvariant=tau-prime, adaptive\ntau=dbar4\nalgo=kmeans\n\nreps=7\n")
        .unwrap();
    cfg.set("reps", "9").unwrap();
    assert_eq!(cfg.dgp, 3);
    assert_eq!(cfg.n_per_community, 120);
    assert_eq!(cfg.reps, 9);
    assert_eq!(cfg.pipelines, vec![Pipeline::Single(Variant::TauPrime), Pipeline::Adaptive]);
    assert_eq!(cfg.tau_mode, TauMode::Dbar4);
    assert_eq!(cfg.algorithm, Algorithm::KMeans);
    assert_eq!("2.5".parse::<TauMode>().unwrap(), TauMode::Fixed(2.5));
    for bad in ["colour=red", "dgp", "tau=-1", "variant=laplace"] {
        assert!(cfg.apply_file(bad).is_err(), "{bad}");
    }
    let cfg = ExperimentConfig {
        dgp: 5,
        ..ExperimentConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn table_cells() {
    let rec = |dgp: u8, ccp: f64| ExperimentRecord {
        rep: 0,
        dgp,
        n: 400,
        k: 2,
        variant: "tau".into(),
        algo: "modified".into(),
        tau: Some(3.0),
        ccp: Some(ccp),
        nmi: Some(ccp),
        excluded: Exclusion::No,
        runtime_ms: None,
    };
    let inputs = vec![(TauMode::Jy, vec![rec(1, 1.0), rec(1, 1.0)]), (TauMode::Dbar, vec![rec(1, 0.5), rec(1, 1.0)])];
    let rows = summarize_table(&inputs, &[(1, 200, TauMode::Jy), (1, 200, TauMode::Dbar)]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].ccp, rows[0].reps), (1.0, 2));
    assert_eq!(rows[1].ccp, 0.75);
    assert!(matches!(
        summarize_table(&inputs, &[(3, 200, TauMode::Jy)]),
        Err(Error::MissingCell(_))
    ));
}
