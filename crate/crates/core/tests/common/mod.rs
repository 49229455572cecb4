//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use reclink::data::LinkageData;
use reclink::ingest::{Code, PivSpec, RecordTable};
use reclink::kernels::{linked_truth_joint, obs_given_truth, truth_prior, ModelParams};

/// Every partial one-to-one matching, as `link_of_row`.
pub fn matchings(n_a: usize, n_b: usize) -> Vec<Vec<Option<usize>>> {
    fn rec(i: usize, n_a: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n_a {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        rec(i + 1, n_a, used, cur, out);
        cur.pop();
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                rec(i + 1, n_a, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n_a, &mut vec![false; n_b], &mut Vec::new(), &mut out);
    out
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|x| (x as f64).ln()).sum()
}

/// Exact `P(Delta_ij = 1 | G)` by summing the complete-data likelihood over every matching
/// and every assignment of true values.
pub fn exact_link_posterior(data: &LinkageData, params: &ModelParams<f64>) -> Vec<Vec<f64>> {
    let (n_a, n_b, k) = (data.n_a(), data.n_b(), data.n_pivs());
    let sizes: Vec<usize> = data.specs.iter().map(|s| s.support_size).collect();
    let n_vars = (n_a + n_b) * k;
    let mut post = vec![vec![0.0; n_b]; n_a];
    let mut total = 0.0;
    for delta in matchings(n_a, n_b) {
        let l = delta.iter().flatten().count();
        let prior = (ln_factorial(n_b - l) - ln_factorial(n_b)).exp()
            * params.gamma.powi(l as i32)
            * (1.0 - params.gamma).powi((n_a - l) as i32);
        let mut col_linked = vec![false; n_b];
        for j in delta.iter().flatten() {
            col_linked[*j] = true;
        }
        let mut h = vec![1 as Code; n_vars];
        let mut mass = 0.0;
        loop {
            let ha = |i: usize, x: usize| h[i * k + x];
            let hb = |j: usize, x: usize| h[(n_a + j) * k + x];
            let mut w = prior;
            for x in 0..k {
                let spec = &data.specs[x];
                for i in 0..n_a {
                    w *= obs_given_truth(spec.support_size, data.a.get(i, x), ha(i, x), params.phi_missing_a[x], params.phi_mistake[x]).unwrap();
                    match delta[i] {
                        Some(j) => {
                            let t = data.time_gap::<f64>(i, j);
                            w *= linked_truth_joint(spec, x, params, ha(i, x), hb(j, x), t).unwrap();
                        }
                        None => w *= truth_prior(&params.eta[x], ha(i, x)).unwrap(),
                    }
                }
                for j in 0..n_b {
                    w *= obs_given_truth(spec.support_size, data.b.get(j, x), hb(j, x), params.phi_missing_b[x], params.phi_mistake[x]).unwrap();
                    if !col_linked[j] {
                        w *= truth_prior(&params.eta[x], hb(j, x)).unwrap();
                    }
                }
            }
            mass += w;
            // odometer over all true-value assignments
            let mut pos = 0;
            loop {
                if pos == n_vars {
                    break;
                }
                let size = sizes[pos % k] as Code;
                if h[pos] < size {
                    h[pos] += 1;
                    break;
                }
                h[pos] = 1;
                pos += 1;
            }
            if pos == n_vars {
                break;
            }
        }
        total += mass;
        for (i, j) in delta.iter().enumerate() {
            if let Some(j) = j {
                post[i][*j] += mass;
            }
        }
    }
    for row in &mut post {
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    post
}

/// Small linkage instance built from code rows.
pub fn tiny_data(specs: Vec<PivSpec>, a: &[&[Code]], b: &[&[Code]], times: Option<(&[f64], &[f64])>) -> LinkageData {
    let rows = |v: &[&[Code]]| v.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    LinkageData::new(
        RecordTable::from_rows(&rows(a), times.map(|t| t.0.to_vec())).unwrap(),
        RecordTable::from_rows(&rows(b), times.map(|t| t.1.to_vec())).unwrap(),
        specs,
    )
    .unwrap()
}
