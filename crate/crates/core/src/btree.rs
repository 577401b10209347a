//! Rooted-tree algebra for B-series: tree enumeration, the density `γ`,
//! the symmetry coefficient `α`, elementary weights of a tableau, and the
//! resulting deterministic and stochastic orders.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::tableau::ButcherTableau;

/// Largest tree order accepted by enumeration and order checks.
pub const MAX_TREE_ORDER: usize = 12;

/// Absolute tolerance for `φ̂(τ) = 1/γ(τ)`.
pub const ORDER_CONDITION_TOL: f64 = 1e-10;

/// An unlabeled rooted tree in canonical form.
///
/// Children are kept sorted, so two trees compare equal exactly when they
/// are isomorphic. The derived ordering compares node count first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RootedTree {
    order: usize,
    children: Vec<RootedTree>,
}

impl RootedTree {
    /// The single node `•`.
    pub fn leaf() -> Self {
        Self {
            order: 1,
            children: Vec::new(),
        }
    }

    /// `[τ1, …, τκ]`: a new root grafted onto the given subtrees.
    pub fn graft(mut children: Vec<RootedTree>) -> Self {
        children.sort();
        let order = 1 + children.iter().map(|c| c.order).sum::<usize>();
        Self { order, children }
    }

    /// Node count `ρ(τ)`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return f.write_str("•");
        }
        f.write_str("[")?;
        for (i, child) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{child}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for RootedTree {
    type Err = Error;

    /// Parses the bracket notation `•`, `[•]`, `[•,[•]]`. The ASCII forms
    /// `*` and `o` are accepted for the node.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidTreeNotation(s.to_string());
        fn parse(chars: &[char], pos: &mut usize) -> Option<RootedTree> {
            match chars.get(*pos)? {
                '•' | '*' | 'o' => {
                    *pos += 1;
                    Some(RootedTree::leaf())
                }
                '[' => {
                    *pos += 1;
                    let mut children = Vec::new();
                    loop {
                        children.push(parse(chars, pos)?);
                        match chars.get(*pos)? {
                            ',' => *pos += 1,
                            ']' => {
                                *pos += 1;
                                return Some(RootedTree::graft(children));
                            }
                            _ => return None,
                        }
                    }
                }
                _ => None,
            }
        }
        let mut pos = 0;
        let tree = parse(&chars, &mut pos).ok_or_else(bad)?;
        if pos != chars.len() {
            return Err(bad());
        }
        Ok(tree)
    }
}

fn check_order(max_order: usize) -> Result<()> {
    if (1..=MAX_TREE_ORDER).contains(&max_order) {
        Ok(())
    } else {
        Err(Error::TreeOrderOutOfRange(max_order))
    }
}

/// All rooted trees with `1 <= ρ(τ) <= max_order`, one per isomorphism
/// class, sorted by order and then canonical key.
pub fn enumerate_trees(max_order: usize) -> Result<Vec<RootedTree>> {
    check_order(max_order)?;
    let mut all: Vec<RootedTree> = vec![RootedTree::leaf()];
    for n in 2..=max_order {
        // Forests of total order n-1 as non-increasing index sequences into
        // `all`, which holds every tree of order < n.
        let mut level = Vec::new();
        let mut stack = Vec::new();
        forests(&all, n - 1, all.len(), &mut stack, &mut level);
        level.sort();
        all.extend(level);
    }
    Ok(all)
}

fn forests(
    trees: &[RootedTree],
    remaining: usize,
    bound: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<RootedTree>,
) {
    if remaining == 0 {
        out.push(RootedTree::graft(stack.iter().map(|&i| trees[i].clone()).collect()));
        return;
    }
    for i in (0..bound).rev() {
        if trees[i].order <= remaining {
            stack.push(i);
            forests(trees, remaining - trees[i].order, i + 1, stack, out);
            stack.pop();
        }
    }
}

/// Density `γ(τ) = ρ(τ) · Π γ(τ_j)`.
pub fn gamma(tree: &RootedTree) -> BigRational {
    BigRational::from_integer(gamma_int(tree))
}

fn gamma_int(tree: &RootedTree) -> BigInt {
    tree.children
        .iter()
        .fold(BigInt::from(tree.order), |acc, c| acc * gamma_int(c))
}

/// Symmetry coefficient `α(τ) = Π α(τ_j) / (r_1! ⋯ r_q!)`, where the
/// `r_k` count repeated subtrees.
pub fn alpha(tree: &RootedTree) -> BigRational {
    let mut value = BigRational::one();
    let mut run = 0u32;
    for (i, child) in tree.children.iter().enumerate() {
        value *= alpha(child);
        if i > 0 && tree.children[i - 1] == *child {
            run += 1;
        } else {
            run = 1;
        }
        value /= BigRational::from_integer(BigInt::from(run));
    }
    value
}

/// Stage and method weights `φ̂_i(τ)`, `φ̂(τ)` for one tableau, memoized
/// per tree.
pub struct ElementaryWeights<'a> {
    tableau: &'a ButcherTableau,
    stage: HashMap<RootedTree, Vec<f64>>,
}

impl<'a> ElementaryWeights<'a> {
    pub fn new(tableau: &'a ButcherTableau) -> Self {
        Self {
            tableau,
            stage: HashMap::new(),
        }
    }

    /// `φ̂_i(τ) = Σ_j a_ij Π_k φ̂_j(τ_k)` for every stage `i`.
    pub fn stage_weights(&mut self, tree: &RootedTree) -> Vec<f64> {
        if let Some(w) = self.stage.get(tree) {
            return w.clone();
        }
        let products = self.child_products(tree);
        let s = self.tableau.stages();
        let w: Vec<f64> = (0..s)
            .map(|i| {
                self.tableau
                    .a_row(i)
                    .iter()
                    .zip(&products)
                    .map(|(a, p)| a * p)
                    .sum()
            })
            .collect();
        self.stage.insert(tree.clone(), w.clone());
        w
    }

    /// `φ̂(τ) = Σ_i b_i Π_k φ̂_i(τ_k)`.
    pub fn weight(&mut self, tree: &RootedTree) -> f64 {
        let products = self.child_products(tree);
        self.tableau.b().iter().zip(&products).map(|(b, p)| b * p).sum()
    }

    fn child_products(&mut self, tree: &RootedTree) -> Vec<f64> {
        let mut products = vec![1.0; self.tableau.stages()];
        for child in &tree.children {
            let w = self.stage_weights(child);
            for (p, wi) in products.iter_mut().zip(&w) {
                *p *= wi;
            }
        }
        products
    }
}

/// `φ̂(τ)` for a single tree.
pub fn elementary_weight(tableau: &ButcherTableau, tree: &RootedTree) -> f64 {
    ElementaryWeights::new(tableau).weight(tree)
}

/// A tree whose order condition fails.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderViolation {
    pub tree: RootedTree,
    pub weight: f64,
    pub expected: f64,
}

impl OrderViolation {
    pub fn residual(&self) -> f64 {
        (self.weight - self.expected).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    /// Largest `p <= max_check` with all conditions up to order `p` met.
    pub order: usize,
    /// First violated condition at order `order + 1`, if one was reached.
    pub first_failure: Option<OrderViolation>,
}

/// Deterministic order of `tableau`, checking `φ̂(τ) = 1/γ(τ)` for every
/// tree up to `max_check` nodes.
pub fn deterministic_order(tableau: &ButcherTableau, max_check: usize) -> Result<OrderReport> {
    let trees = enumerate_trees(max_check)?;
    let mut weights = ElementaryWeights::new(tableau);
    for tree in &trees {
        let expected = 1.0 / gamma_int(tree).to_f64().expect("γ fits in f64");
        let weight = weights.weight(tree);
        if !((weight - expected).abs() <= ORDER_CONDITION_TOL) {
            return Ok(OrderReport {
                order: tree.order - 1,
                first_failure: Some(OrderViolation {
                    tree: tree.clone(),
                    weight,
                    expected,
                }),
            });
        }
    }
    Ok(OrderReport {
        order: max_check,
        first_failure: None,
    })
}

/// Mean-square and weak order `⌊p_d / 2⌋` of the stochastic method built
/// from a deterministic method of order `p_d`.
pub fn predicted_sde_order(deterministic_order: usize) -> usize {
    deterministic_order / 2
}
