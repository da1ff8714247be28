use vfedpca::data::{partition_features, synth_mixture_gaussian, synth_single_gaussian};
use vfedpca::federation::{
    init_rng, make_clients, random_unit_vector, run_decentralized, run_server_client,
};
use vfedpca::kernel::KernelSpec;
use vfedpca::linalg::{gram_matrix, power_iteration};
use vfedpca::metrics::distance_error;
use vfedpca::topology::{complete_graph, ring_graph, star_graph, TopologyGraph};
use vfedpca::{DenseMatrix, Error, FederationConfig, LocalMode, MergeMode};

fn clients(x: &DenseMatrix, p: usize, mode: &LocalMode) -> Vec<vfedpca::ClientState> {
    let (_, blocks) = partition_features(x, p).unwrap();
    make_clients(blocks, mode).unwrap()
}

#[test]
fn single_client_collapse_for_both_protocols() {
    let x = synth_single_gaussian(16, 10, 1);
    let config = FederationConfig {
        rounds: 3,
        local_iters: 6,
        seed: 77,
        ..Default::default()
    };
    let server = run_server_client(&mut clients(&x, 1, &LocalMode::Pca), &config).unwrap();
    let alone = TopologyGraph::edgeless(1).unwrap();
    let dec = run_decentralized(&mut clients(&x, 1, &LocalMode::Pca), &alone, &config).unwrap();
    let s = gram_matrix(&x, 0.1).unwrap();
    let mut rng = init_rng(77);
    for t in 0..3 {
        let init = random_unit_vector(&mut rng, 16);
        let (pair, _) = power_iteration(&s, &init, 6, config.tol).unwrap();
        for trace in [&server, &dec] {
            let u = &trace.rounds[t].federated_vector;
            assert!(distance_error(&pair.vector, u).unwrap() <= 1e-15);
        }
    }
}

#[test]
fn complete_graph_tracks_server_with_scaled_merge() {
    let x = synth_mixture_gaussian(20, 12, 5);
    for p in [2, 3, 4] {
        for warm_start in [false, true] {
            let config = FederationConfig {
                rounds: 4,
                warm_start,
                merge_mode: MergeMode::WeightScaled,
                seed: 13,
                ..Default::default()
            };
            let s = run_server_client(&mut clients(&x, p, &LocalMode::Pca), &config).unwrap();
            let d = run_decentralized(
                &mut clients(&x, p, &LocalMode::Pca),
                &complete_graph(p).unwrap(),
                &config,
            )
            .unwrap();
            for (rs, rd) in s.rounds.iter().zip(&d.rounds) {
                for u in &rd.client_vectors {
                    assert!(distance_error(&rs.federated_vector, u).unwrap() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn ring_and_star_runs_report_their_traffic() {
    let x = synth_single_gaussian(9, 12, 2);
    let config = FederationConfig {
        rounds: 3,
        update_local_data: true,
        ..Default::default()
    };
    let ring = run_decentralized(
        &mut clients(&x, 4, &LocalMode::Pca),
        &ring_graph(4).unwrap(),
        &config,
    )
    .unwrap();
    assert!(ring.rounds.iter().all(|r| r.scalars_sent == 8 * 10));
    let star = run_decentralized(
        &mut clients(&x, 4, &LocalMode::Pca),
        &star_graph(4, 2).unwrap(),
        &config,
    )
    .unwrap();
    assert!(star.rounds.iter().all(|r| r.scalars_sent == 6 * 10));
    for trace in [&ring, &star] {
        assert_eq!(trace.rounds.len(), 3);
        for r in &trace.rounds {
            assert_eq!(r.client_vectors.len(), 4);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(r.distance_error >= 0.0 && r.distance_error <= 2f64.sqrt());
        }
    }
}

#[test]
fn akpca_federation_runs_with_psd_kernels() {
    let x = synth_mixture_gaussian(15, 9, 4);
    for kernel in [KernelSpec::Linear, KernelSpec::rbf(0.5).unwrap()] {
        let mode = LocalMode::Akpca {
            kernel,
            center: false,
        };
        let config = FederationConfig {
            rounds: 3,
            warm_start: true,
            update_local_data: true,
            mode,
            ..Default::default()
        };
        let trace = run_server_client(&mut clients(&x, 3, &mode), &config).unwrap();
        assert_eq!(trace.rounds.len(), 3);
        assert!(trace.final_pair.unwrap().value > 0.0);
    }
}

#[test]
fn linear_akpca_single_client_matches_unscaled_pca_direction() {
    let x = synth_single_gaussian(12, 7, 8);
    let mode = LocalMode::Akpca {
        kernel: KernelSpec::Linear,
        center: false,
    };
    let config = FederationConfig {
        rounds: 1,
        local_iters: 3000,
        tol: 1e-14,
        mode,
        ..Default::default()
    };
    let k = run_server_client(&mut clients(&x, 1, &mode), &config).unwrap();
    let pca = FederationConfig {
        mode: LocalMode::Pca,
        ..config
    };
    let s = run_server_client(&mut clients(&x, 1, &LocalMode::Pca), &pca).unwrap();
    let uk = &k.final_pair.as_ref().unwrap().vector;
    let us = &s.final_pair.as_ref().unwrap().vector;
    assert!(distance_error(uk, us).unwrap() < 1e-8);
}

#[test]
fn mismatched_graph_is_rejected() {
    let x = synth_single_gaussian(5, 6, 0);
    let err = run_decentralized(
        &mut clients(&x, 3, &LocalMode::Pca),
        &ring_graph(4).unwrap(),
        &FederationConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn too_many_clients_is_an_error() {
    let x = synth_single_gaussian(5, 3, 0);
    assert!(matches!(
        partition_features(&x, 4),
        Err(Error::TooManyClients { p: 4, m: 3 })
    ));
}
