//! End-to-end command tests through `cli_dispatch`, covering exit codes,
//! certificate output, canonical round-trips, and seed determinism.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use opsys_cli::cli_dispatch;
use opsys_core::correlations::{qc_from_pvms, tsirelson_construction};
use opsys_core::io::{
    correlation_to_json, opsys_to_json, save_canonical, CorrelationJson, MatrixJson, PvmJson,
    StateJson,
};
use opsys_core::opsys::OperatorSystemSpace;

/// Serializes tests that read or write the OPSYS_SEED environment variable.
fn env_lock() -> &'static Mutex<()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
}

fn dispatch(args: &[&str]) -> i32 {
    let mut argv = vec!["opsys".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    cli_dispatch(&argv)
}

struct Fixtures {
    dir: tempfile::TempDir,
}

impl Fixtures {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let m2 = OperatorSystemSpace::full(2);
        save_canonical(&dir.path().join("m2.json"), &opsys_to_json(&m2)).unwrap();

        let (alice, bob, state) = tsirelson_construction();
        let pvm_json = |fam: &opsys_core::correlations::PvmFamily| PvmJson {
            dim: fam.dim(),
            measurements: (0..fam.experiments())
                .map(|x| {
                    (0..fam.outcomes())
                        .map(|a| MatrixJson::from_matrix(fam.projection(x, a).matrix()))
                        .collect()
                })
                .collect(),
        };
        save_canonical(&dir.path().join("alice.json"), &pvm_json(&alice)).unwrap();
        save_canonical(&dir.path().join("bob.json"), &pvm_json(&bob)).unwrap();
        save_canonical(
            &dir.path().join("epr.json"),
            &StateJson { dim: 4, rho: MatrixJson::from_matrix(state.rho().matrix()) },
        )
        .unwrap();
        let corr = qc_from_pvms(&alice, &bob, &state, 1e-9).unwrap();
        save_canonical(&dir.path().join("tsirelson.json"), &correlation_to_json(&corr)).unwrap();

        let signalling = CorrelationJson {
            experiments: 2,
            outcomes: 2,
            p: vec![
                vec![
                    vec![vec![0.45, 0.45], vec![0.05, 0.05]],
                    vec![vec![0.25, 0.25], vec![0.25, 0.25]],
                ],
                vec![
                    vec![vec![0.25, 0.25], vec![0.25, 0.25]],
                    vec![vec![0.25, 0.25], vec![0.25, 0.25]],
                ],
            ],
        };
        save_canonical(&dir.path().join("signalling.json"), &signalling).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn join(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn write_matrix(path: &Path, rows: Vec<Vec<[f64; 2]>>) {
    save_canonical(path, &MatrixJson(rows)).unwrap();
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(dispatch(&["--help"]), 0);
    assert_eq!(dispatch(&["no-such-command"]), 2);
    assert_eq!(dispatch(&["cone-check"]), 2);
}

#[test]
fn cone_check_verdicts_and_certificates() {
    let f = Fixtures::new();
    write_matrix(&f.join("identity.json"), vec![
        vec![[1.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [1.0, 0.0]],
    ]);
    write_matrix(&f.join("indefinite.json"), vec![
        vec![[1.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [-5.0, 0.0]],
    ]);

    let cert = f.path("cert.json");
    assert_eq!(
        dispatch(&["cone-check", "--opsys", &f.path("m2.json"), "--x", &f.path("identity.json"),
                   "--output", &cert]),
        0
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(parsed["decision"], "member");

    // Indefinite matrix: not in C_1, but in C(p_1) for p = diag(1,0).
    assert_eq!(
        dispatch(&["cone-check", "--opsys", &f.path("m2.json"), "--x", &f.path("indefinite.json")]),
        1
    );
    assert_eq!(
        dispatch(&["cone-check", "--opsys", &f.path("m2.json"), "--x", &f.path("indefinite.json"),
                   "--p", "diag(1,0)"]),
        0
    );
}

#[test]
fn compress_reports_dimensions() {
    let f = Fixtures::new();
    let out = f.path("compress.json");
    assert_eq!(
        dispatch(&["compress", "--opsys", &f.path("m2.json"), "--p", "diag(1,0)",
                   "--output", &out]),
        0
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["dim_system"], 4);
    assert_eq!(parsed["dim_kernel"], 3);
    assert_eq!(parsed["dim_quotient"], 1);
    assert_eq!(parsed["heuristic"], false);

    // The zero contraction has a degenerate quotient unit.
    assert_eq!(dispatch(&["compress", "--opsys", &f.path("m2.json"), "--p", "diag(0,0)"]), 1);
}

#[test]
fn detect_projection_verdicts() {
    let f = Fixtures::new();
    let out = f.path("verdict.json");
    assert_eq!(
        dispatch(&["detect-projection", "--opsys", &f.path("m2.json"), "--p", "diag(1,0)",
                   "--n-max", "2", "--budget", "150", "--output", &out]),
        0
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["status"]["certified_up_to"], 2);

    assert_eq!(
        dispatch(&["detect-projection", "--opsys", &f.path("m2.json"), "--p", "diag(0.5,0.5)",
                   "--n-max", "1", "--budget", "100", "--output", &out]),
        1
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["status"], "rejected");
    assert!(parsed["witness"].is_object());
    assert!(parsed["witness"]["ambient_lambda_min"].as_f64().unwrap() <= -1e-7);
}

#[test]
fn quotient_iso_and_block_check() {
    let f = Fixtures::new();
    assert_eq!(
        dispatch(&["quotient-iso", "--opsys", &f.path("m2.json"), "--p", "diag(1,0)",
                   "--trials", "20", "--n-max", "2"]),
        0
    );

    write_matrix(&f.join("a.json"), vec![
        vec![[1.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [1.0, 0.0]],
    ]);
    write_matrix(&f.join("sigma_x.json"), vec![
        vec![[0.0, 0.0], [1.0, 0.0]],
        vec![[1.0, 0.0], [0.0, 0.0]],
    ]);
    // [[e, sx], [sx, e]] compresses to e and is accepted.
    assert_eq!(
        dispatch(&["block-check", "--opsys", &f.path("m2.json"), "--p", "diag(1,0)",
                   "--a", &f.path("a.json"), "--b", &f.path("a.json"),
                   "--x", &f.path("sigma_x.json")]),
        0
    );
    // [[0, sx], [sx, 0]] compresses to sigma_x, which is indefinite.
    write_matrix(&f.join("zero.json"), vec![
        vec![[0.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [0.0, 0.0]],
    ]);
    assert_eq!(
        dispatch(&["block-check", "--opsys", &f.path("m2.json"), "--p", "diag(1,0)",
                   "--a", &f.path("zero.json"), "--b", &f.path("zero.json"),
                   "--x", &f.path("sigma_x.json")]),
        1
    );
}

#[test]
fn corr_pipeline() {
    let f = Fixtures::new();

    assert_eq!(dispatch(&["corr", "validate", "--in", &f.path("tsirelson.json")]), 0);
    assert_eq!(dispatch(&["corr", "validate", "--in", &f.path("signalling.json")]), 1);

    // from-pvm regenerates the committed correlation byte-for-byte.
    let regenerated = f.path("regen.json");
    assert_eq!(
        dispatch(&["corr", "from-pvm", "--alice", &f.path("alice.json"),
                   "--bob", &f.path("bob.json"), "--state", &f.path("epr.json"),
                   "--out", &regenerated]),
        0
    );
    let a = std::fs::read(f.join("tsirelson.json")).unwrap();
    let b = std::fs::read(&regenerated).unwrap();
    assert_eq!(a, b, "regenerated correlation differs from fixture");

    assert_eq!(dispatch(&["corr", "chsh", "--in", &f.path("tsirelson.json")]), 0);

    // Non-commuting PVMs are refused.
    let sx_plus = vec![
        vec![[0.5, 0.0], [0.5, 0.0]],
        vec![[0.5, 0.0], [0.5, 0.0]],
    ];
    let sx_minus = vec![
        vec![[0.5, 0.0], [-0.5, 0.0]],
        vec![[-0.5, 0.0], [0.5, 0.0]],
    ];
    let z_pvm = PvmJson {
        dim: 2,
        measurements: vec![vec![
            MatrixJson(vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.0, 0.0]]]),
            MatrixJson(vec![vec![[0.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]]),
        ]],
    };
    let x_pvm = PvmJson {
        dim: 2,
        measurements: vec![vec![MatrixJson(sx_plus), MatrixJson(sx_minus)]],
    };
    save_canonical(&f.join("zpvm.json"), &z_pvm).unwrap();
    save_canonical(&f.join("xpvm.json"), &x_pvm).unwrap();
    save_canonical(
        &f.join("mixed.json"),
        &StateJson {
            dim: 2,
            rho: MatrixJson(vec![vec![[0.5, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.5, 0.0]]]),
        },
    )
    .unwrap();
    assert_eq!(
        dispatch(&["corr", "from-pvm", "--alice", &f.path("zpvm.json"),
                   "--bob", &f.path("xpvm.json"), "--state", &f.path("mixed.json")]),
        1
    );
}

#[test]
fn corr_from_state_scalar_system() {
    let f = Fixtures::new();
    // One-dimensional generators carrying a product correlation.
    let scalar = |v: f64| MatrixJson(vec![vec![[v, 0.0]]]);
    let e = [[0.2, 0.8], [0.6, 0.4]];
    let g = [[0.7, 0.3], [0.5, 0.5]];
    let generators: Vec<Vec<Vec<Vec<MatrixJson>>>> = (0..2)
        .map(|x| {
            (0..2)
                .map(|y| {
                    let _ = y;
                    (0..2)
                        .map(|a| (0..2).map(|b| scalar(e[x][a] * g[y][b])).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let ns = opsys_core::io::NsSystemJson { dim: 1, experiments: 2, outcomes: 2, generators };
    save_canonical(&f.join("ns.json"), &ns).unwrap();
    save_canonical(
        &f.join("one.json"),
        &StateJson { dim: 1, rho: MatrixJson(vec![vec![[1.0, 0.0]]]) },
    )
    .unwrap();
    let out = f.path("embedded.json");
    assert_eq!(
        dispatch(&["corr", "from-state", "--ns", &f.path("ns.json"),
                   "--state", &f.path("one.json"), "--out", &out]),
        0
    );
    let parsed: CorrelationJson =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed.p[0][0][0][0], 0.2 * 0.7);
}

#[test]
fn canonical_save_load_round_trip() {
    // save(load(f)) is bit-identical for canonical files.
    let f = Fixtures::new();
    for name in ["m2.json", "tsirelson.json", "alice.json", "epr.json"] {
        let original = std::fs::read_to_string(f.join(name)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&original).unwrap();
        let rewritten = opsys_core::io::canonical_json(&value).unwrap();
        assert_eq!(original, rewritten, "round trip changed {name}");
    }
}

#[test]
fn selftest_certificates_are_byte_identical() {
    let _guard = env_lock().lock().unwrap();
    let f = Fixtures::new();
    let run = |out: &str| {
        assert_eq!(dispatch(&["selftest", "--seed", "3", "--output", out]), 0);
        std::fs::read(out).unwrap()
    };
    let a = run(&f.path("selftest_a.json"));
    let b = run(&f.path("selftest_b.json"));
    assert_eq!(a, b, "selftest certificates differ across runs");
}

#[test]
fn env_seed_overrides_flag() {
    let _guard = env_lock().lock().unwrap();
    let f = Fixtures::new();
    std::env::set_var("OPSYS_SEED", "11");
    let with_env = {
        let out = f.path("env.json");
        assert_eq!(dispatch(&["selftest", "--seed", "3", "--output", &out]), 0);
        std::fs::read_to_string(out).unwrap()
    };
    std::env::remove_var("OPSYS_SEED");
    let with_flag = {
        let out = f.path("flag.json");
        assert_eq!(dispatch(&["selftest", "--seed", "11", "--output", &out]), 0);
        std::fs::read_to_string(out).unwrap()
    };
    assert_eq!(with_env, with_flag, "OPSYS_SEED must override --seed");
}
