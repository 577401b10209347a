//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use strat_rk::btree::RootedTree;

/// AHU-style canonical string of the subtree at `v`.
pub fn canon(children: &[Vec<usize>], v: usize) -> String {
    let mut parts: Vec<String> = children[v].iter().map(|&c| canon(children, c)).collect();
    parts.sort();
    format!("({})", parts.concat())
}

pub fn canon_tree(t: &RootedTree) -> String {
    let mut parts: Vec<String> = t.children().iter().map(canon_tree).collect();
    parts.sort();
    format!("({})", parts.concat())
}

fn children_of(parent: &[usize]) -> Vec<Vec<usize>> {
    let mut ch = vec![Vec::new(); parent.len() + 1];
    for (i, &p) in parent.iter().enumerate() {
        ch[p].push(i + 1);
    }
    ch
}

/// Every parent array with `parent[i] < i` on `n` nodes, i.e. every
/// increasingly labelled rooted tree. Calls `visit` with the children lists.
fn for_each_labelled_tree(n: usize, visit: &mut dyn FnMut(&[Vec<usize>])) {
    fn rec(n: usize, parent: &mut Vec<usize>, visit: &mut dyn FnMut(&[Vec<usize>])) {
        if parent.len() + 1 == n {
            visit(&children_of(parent));
            return;
        }
        let next = parent.len() + 1;
        for p in 0..next {
            parent.push(p);
            rec(n, parent, visit);
            parent.pop();
        }
    }
    rec(n, &mut Vec::new(), visit);
}

fn subtree_sizes(children: &[Vec<usize>]) -> Vec<u64> {
    let mut size = vec![1u64; children.len()];
    for v in (0..children.len()).rev() {
        for &c in &children[v] {
            size[v] += size[c];
        }
    }
    size
}

pub struct OracleEntry {
    pub labellings: u64,
    pub gamma: u64,
}

/// Brute-force table from canonical string to (labelling count, γ).
pub fn oracle(n: usize) -> BTreeMap<String, OracleEntry> {
    let mut table = BTreeMap::new();
    for_each_labelled_tree(n, &mut |ch| {
        let key = canon(ch, 0);
        let g: u64 = subtree_sizes(ch).iter().product();
        table
            .entry(key)
            .or_insert(OracleEntry { labellings: 0, gamma: g })
            .labellings += 1;
    });
    table
}

/// Probabilists' Hermite rule from the three-term recurrence: roots of
/// `He_n` bracketed on a grid and bisected, weights `n! / (n He_{n-1}(x))^2`.
pub fn hermite_rule(n: usize) -> Vec<(f64, f64)> {
    let he = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 1..n {
            let p2 = x * p1 - k as f64 * p0;
            p0 = p1;
            p1 = p2;
        }
        (p1, p0)
    };
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let bound = (4.0 * n as f64 + 2.0).sqrt();
    let grid = 20_000;
    let mut nodes = Vec::new();
    for k in 0..grid {
        let mut lo = -bound + 2.0 * bound * k as f64 / grid as f64;
        let mut hi = -bound + 2.0 * bound * (k + 1) as f64 / grid as f64;
        if he(lo).0.signum() == he(hi).0.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if he(mid).0.signum() == he(lo).0.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let (_, pm1) = he(x);
        nodes.push((x, fact / (n as f64 * pm1).powi(2)));
    }
    assert_eq!(nodes.len(), n);
    nodes
}

