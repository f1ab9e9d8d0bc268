// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{SteeringError, VectorKind};
use crate::obfuscation::{Concept, ConceptClass};
use crate::replab::{class_means, norm, ConceptTable};

/// Inputs for [`make_vectors`].
#[derive(Debug, Clone, Copy)]
pub struct VectorSources<'a> {
    /// Centered in-naming representations; also the norm reference for
    /// random vectors.
    pub in_naming: &'a ConceptTable,
    /// Cross-naming representations, needed by the cross-naming and
    /// symbolic kinds.
    pub cross_naming: Option<&'a ConceptTable>,
    pub seed: u64,
    /// `s` for the symbolic kind.
    pub symbolic_scale: f64,
}

fn pick(table: &ConceptTable, concepts: &[Concept]) -> Result<ConceptTable, SteeringError> {
    concepts
        .iter()
        .map(|&c| {
            table
                .get(&c)
                .map(|v| (c, v.clone()))
                .ok_or(SteeringError::MissingConcept(c))
        })
        .collect()
}

/// The concept -> vector table of a given kind, restricted to `concepts`.
pub fn make_vectors(
    kind: VectorKind,
    sources: &VectorSources<'_>,
    concepts: &[Concept],
) -> Result<ConceptTable, SteeringError> {
    let cross = || sources.cross_naming.ok_or(SteeringError::MissingSource("cross-naming"));
    match kind {
        VectorKind::InNaming | VectorKind::Negative => pick(sources.in_naming, concepts),
        VectorKind::CrossNaming => pick(cross()?, concepts),
        VectorKind::Shuffled => shuffle_table(&pick(sources.in_naming, concepts)?, sources.seed),
        VectorKind::Symbolic => pick(&build_symbolic(cross()?, sources.symbolic_scale)?, concepts),
        VectorKind::RandomMatchedNorm => {
            let reference = pick(sources.in_naming, concepts)?;
            let mut rng = ChaCha8Rng::seed_from_u64(sources.seed);
            Ok(reference
                .into_iter()
                .map(|(c, r)| {
                    let g: Vec<f64> = (0..r.len()).map(|_| rng.sample(StandardNormal)).collect();
                    let k = norm(&r) / norm(&g);
                    (c, g.into_iter().map(|x| x * k).collect())
                })
                .collect())
        }
    }
}

fn derange_with(rng: &mut impl Rng, n: usize) -> Result<Vec<usize>, SteeringError> {
    if n < 2 {
        return Err(SteeringError::TooFewToShuffle(n));
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &x)| i != x) {
            return Ok(p);
        }
    }
}

/// A uniformly random permutation of `0..n` with no fixed point.
pub fn derangement(n: usize, seed: u64) -> Result<Vec<usize>, SteeringError> {
    derange_with(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// Reassigns vectors within each concept class by a seeded derangement, so
/// no concept keeps its own vector.
pub fn shuffle_table(table: &ConceptTable, seed: u64) -> Result<ConceptTable, SteeringError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ConceptTable::new();
    for class in [ConceptClass::Actions, ConceptClass::Predicates] {
        let members: Vec<Concept> = table.keys().copied().filter(|c| c.class() == class).collect();
        if members.is_empty() {
            continue;
        }
        let perm = derange_with(&mut rng, members.len())?;
        for (i, &c) in members.iter().enumerate() {
            out.insert(c, table[&members[perm[i]]].clone());
        }
    }
    Ok(out)
}

/// `out[c] = table[map[c]]`; concepts absent from `map` keep their vector.
/// `map` must be a bijection on a subset of the table's concepts.
pub fn permute_table(table: &ConceptTable, map: &BTreeMap<Concept, Concept>) -> Result<ConceptTable, SteeringError> {
    let sources: BTreeSet<&Concept> = map.values().collect();
    let targets: BTreeSet<&Concept> = map.keys().collect();
    if sources != targets {
        return Err(SteeringError::InvalidSpec(
            "permutation must map a set of concepts onto itself".into(),
        ));
    }
    if let Some(c) = map.keys().find(|c| !table.contains_key(c)) {
        return Err(SteeringError::MissingConcept(*c));
    }
    Ok(table
        .iter()
        .map(|(c, v)| (*c, map.get(c).map_or_else(|| v.clone(), |src| table[src].clone())))
        .collect())
}

/// `m + s (r_a - m)` with `m` the mean of `a`'s class, so each output sits
/// at the class mean displaced along the centered direction of `a`.
pub fn build_symbolic(cross_naming: &ConceptTable, s: f64) -> Result<ConceptTable, SteeringError> {
    let means = class_means(cross_naming)?;
    Ok(cross_naming
        .iter()
        .map(|(c, r)| {
            let m = &means[&c.class()];
            (*c, r.iter().zip(m).map(|(x, m)| m + s * (x - m)).collect())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obfuscation::Concept::*;
    use approx::assert_relative_eq;

    fn actions() -> ConceptTable {
        ConceptTable::from([
            (PickUp, vec![1.0, 0.0, 2.0]),
            (PutDown, vec![0.0, 3.0, -1.0]),
            (Stack, vec![-2.0, 1.0, 0.5]),
            (Unstack, vec![4.0, -1.0, 0.0]),
        ])
    }

    fn sources(t: &ConceptTable) -> VectorSources<'_> {
        VectorSources {
            in_naming: t,
            cross_naming: Some(t),
            seed: 9,
            symbolic_scale: 10.0,
        }
    }

    #[test]
    fn random_vectors_match_norms_and_seed() {
        let t = actions();
        let concepts = ConceptClass::Actions.members();
        let a = make_vectors(VectorKind::RandomMatchedNorm, &sources(&t), concepts).unwrap();
        let b = make_vectors(VectorKind::RandomMatchedNorm, &sources(&t), concepts).unwrap();
        assert_eq!(a, b);
        for c in concepts {
            assert_relative_eq!(norm(&a[c]), norm(&t[c]), max_relative = 1e-12);
        }
        let other = VectorSources {
            seed: 10,
            ..sources(&t)
        };
        assert_ne!(
            make_vectors(VectorKind::RandomMatchedNorm, &other, concepts).unwrap(),
            a
        );
    }

    #[test]
    fn missing_concepts() {
        let t = actions();
        assert!(matches!(
            make_vectors(VectorKind::InNaming, &sources(&t), &[Holding]),
            Err(SteeringError::MissingConcept(Holding))
        ));
        let no_cross = VectorSources {
            cross_naming: None,
            ..sources(&t)
        };
        assert!(make_vectors(VectorKind::CrossNaming, &no_cross, &[Stack]).is_err());
    }

    #[test]
    fn shuffles_are_derangements() {
        let t = actions();
        let s = shuffle_table(&t, 1).unwrap();
        for c in t.keys() {
            assert_ne!(s[c], t[c]);
        }
        let mut got: Vec<_> = s.values().cloned().collect();
        let mut want: Vec<_> = t.values().cloned().collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        assert!(matches!(derangement(1, 0), Err(SteeringError::TooFewToShuffle(1))));
        assert_eq!(derangement(2, 5).unwrap(), vec![1, 0]);
    }

    #[test]
    fn identity_permutation_is_a_no_op() {
        let t = actions();
        let id: BTreeMap<Concept, Concept> = t.keys().map(|&c| (c, c)).collect();
        assert_eq!(permute_table(&t, &id).unwrap(), t);
        let swap = BTreeMap::from([(PickUp, Stack), (Stack, PickUp)]);
        let p = permute_table(&t, &swap).unwrap();
        assert_eq!(p[&PickUp], t[&Stack]);
        assert_eq!(p[&PutDown], t[&PutDown]);
        let bad = BTreeMap::from([(PickUp, Stack)]);
        assert!(permute_table(&t, &bad).is_err());
    }

    #[test]
    fn symbolic_tables() {
        let t = actions();
        let means = class_means(&t).unwrap();
        let m = &means[&ConceptClass::Actions];
        let zero = build_symbolic(&t, 0.0).unwrap();
        assert!(zero.values().all(|v| v == m));
        let s10 = build_symbolic(&t, 10.0).unwrap();
        let s20 = build_symbolic(&t, 20.0).unwrap();
        for (c, r) in &t {
            for i in 0..3 {
                assert_relative_eq!(
                    s20[c][i] - s10[c][i],
                    10.0 * (r[i] - m[i]),
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
        for i in 0..3 {
            let avg: f64 = s10.values().map(|v| v[i]).sum::<f64>() / 4.0;
            assert_relative_eq!(avg, m[i], epsilon = 1e-12);
        }
        let mut partial = t.clone();
        partial.remove(&Stack);
        assert!(build_symbolic(&partial, 10.0).is_err());
    }
}
