//! Regenerates the canonical fixture files under `fixtures/`.
//!
//! Run from the repository root:
//! `cargo run -p opsys-cli --example make_fixtures`

use std::path::Path;

use opsys_core::correlations::{qc_from_pvms, tsirelson_construction};
use opsys_core::io::{
    correlation_to_json, opsys_to_json, save_canonical, CorrelationJson, MatrixJson, PvmJson,
    StateJson,
};
use opsys_core::opsys::OperatorSystemSpace;

fn main() {
    let dir = Path::new("fixtures");
    std::fs::create_dir_all(dir).expect("create fixtures dir");

    // Full M_2 as an operator system.
    let m2 = OperatorSystemSpace::full(2);
    save_canonical(&dir.join("m2.json"), &opsys_to_json(&m2)).unwrap();

    // The optimal CHSH strategy: PVM families, the entangled state, and the
    // resulting correlation.
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
    save_canonical(&dir.join("alice.json"), &pvm_json(&alice)).unwrap();
    save_canonical(&dir.join("bob.json"), &pvm_json(&bob)).unwrap();
    save_canonical(
        &dir.join("epr.json"),
        &StateJson { dim: 4, rho: MatrixJson::from_matrix(state.rho().matrix()) },
    )
    .unwrap();
    let corr = qc_from_pvms(&alice, &bob, &state, 1e-9).unwrap();
    save_canonical(&dir.join("tsirelson.json"), &correlation_to_json(&corr)).unwrap();

    // A correlation that signals: Alice's marginal depends on Bob's input.
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
    save_canonical(&dir.join("signalling.json"), &signalling).unwrap();

    // A Hermitian element of M_2 for cone checks.
    let x = MatrixJson(vec![
        vec![[1.0, 0.0], [0.0, 0.0]],
        vec![[0.0, 0.0], [-5.0, 0.0]],
    ]);
    save_canonical(&dir.join("x_indefinite.json"), &x).unwrap();

    println!("fixtures written to {}", dir.display());
}
