mod common;

use common::{exact_link_posterior, matchings, tiny_data};
use reclink::data::LinkageData;
use reclink::gibbs::{run_chain, ChainConfig};
use reclink::ingest::PivSpec;
use reclink::kernels::ModelParams;

fn empirical_link_freq(data: &LinkageData, params: &ModelParams<f64>, kept: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; data.n_b()]; data.n_a()];
    let cfg = ChainConfig { burn_in: 200, kept, seed };
    run_chain(data, params, &cfg, |s| {
        for (i, j) in s.links() {
            counts[i][j] += 1;
        }
        Ok(())
    })
    .unwrap();
    counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64 / kept as f64).collect())
        .collect()
}

fn assert_close(emp: &[Vec<f64>], exact: &[Vec<f64>], tol: f64) {
    for (i, (e, x)) in emp.iter().zip(exact).enumerate() {
        for j in 0..e.len() {
            assert!((e[j] - x[j]).abs() < tol, "cell ({i},{j}): sampled {} exact {}\n{emp:?}\n{exact:?}", e[j], x[j]);
        }
    }
}

#[test]
fn partial_matchings_are_counted() {
    assert_eq!(matchings(2, 3).len(), 13);
    assert_eq!(matchings(3, 4).len(), 73);
}

#[test]
fn single_stable_piv_matches_enumeration() {
    let data = tiny_data(vec![PivSpec::stable("v", 2)], &[&[1], &[2]], &[&[1], &[2], &[1]], None);
    let params = ModelParams {
        gamma: 0.5,
        eta: vec![vec![0.5, 0.5]],
        alpha: vec![None],
        phi_mistake: vec![0.1],
        phi_missing_a: vec![0.0],
        phi_missing_b: vec![0.0],
    };
    let exact = exact_link_posterior(&data, &params);
    assert_close(&empirical_link_freq(&data, &params, 100_000, 1), &exact, 0.02);
}

#[test]
fn stable_and_unstable_with_missing_match_enumeration() {
    let specs = vec![PivSpec::stable("s", 2), PivSpec::unstable("u", 2).with_mistake_bound(0.2)];
    let data = tiny_data(
        specs,
        &[&[1, 2], &[0, 1], &[2, 2]],
        &[&[1, 1], &[2, 2], &[1, 0], &[2, 1]],
        Some((&[0.0, 1.0, 0.5], &[2.0, 3.0, 1.5, 4.0])),
    );
    let params = ModelParams {
        gamma: 0.6,
        eta: vec![vec![0.4, 0.6], vec![0.7, 0.3]],
        alpha: vec![None, Some(0.3f64.ln())],
        phi_mistake: vec![0.08, 0.15],
        phi_missing_a: vec![1.0 / 3.0, 0.0],
        phi_missing_b: vec![0.0, 0.25],
    };
    let exact = exact_link_posterior(&data, &params);
    assert_close(&empirical_link_freq(&data, &params, 100_000, 2), &exact, 0.02);
}

#[test]
fn unstable_only_matches_enumeration() {
    let data = tiny_data(
        vec![PivSpec::unstable("u", 2).with_mistake_bound(0.0)],
        &[&[1], &[2]],
        &[&[1], &[1], &[2]],
        Some((&[0.0, 0.0], &[0.5, 3.0, 1.0])),
    );
    let params = ModelParams {
        gamma: 0.4,
        eta: vec![vec![0.5, 0.5]],
        alpha: vec![Some(0.5f64.ln())],
        phi_mistake: vec![0.0],
        phi_missing_a: vec![0.0],
        phi_missing_b: vec![0.0],
    };
    let exact = exact_link_posterior(&data, &params);
    assert_close(&empirical_link_freq(&data, &params, 100_000, 3), &exact, 0.02);
}
