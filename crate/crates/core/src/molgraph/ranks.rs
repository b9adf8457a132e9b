use super::{sssr, MolGraph};

fn densify<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let classes = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect();
    (classes, sorted.len())
}

fn refine(m: &MolGraph, mut classes: Vec<usize>, mut count: usize) -> (Vec<usize>, usize) {
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..m.atom_count())
            .map(|i| {
                let mut nb: Vec<(u8, usize)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (m.bond(bi).code(), classes[j]))
                    .collect();
                nb.sort_unstable();
                (classes[i], nb)
            })
            .collect();
        let (next, next_count) = densify(&keys);
        if next_count == count {
            return (next, next_count);
        }
        classes = next;
        count = next_count;
    }
}

/// Total order over atoms, invariant to input ordering up to symmetric ties.
///
/// Atoms start from (element, charge, degree, H count, aromaticity, ring
/// membership) classes, refined by neighbor classes and bond codes until
/// stable. Remaining ties are split by promoting the smallest-index atom of
/// the lowest tied class and refining again.
pub fn canonical_ranks(m: &MolGraph) -> Vec<usize> {
    let n = m.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let rings = sssr(m);
    let init: Vec<(u8, i8, usize, u8, bool, bool)> = (0..n)
        .map(|i| {
            let a = m.atom(i);
            (
                a.element.atomic_number(),
                a.formal_charge,
                m.degree(i),
                a.implicit_h,
                a.is_aromatic,
                rings.atom_in_ring[i],
            )
        })
        .collect();
    let (classes, count) = densify(&init);
    let (mut classes, mut count) = refine(m, classes, count);
    while count < n {
        let mut sizes = vec![0usize; count];
        for &c in &classes {
            sizes[c] += 1;
        }
        let tied = (0..count).find(|&c| sizes[c] > 1).expect("some class is tied");
        let pick = (0..n).find(|&i| classes[i] == tied).unwrap();
        let split: Vec<usize> = (0..n)
            .map(|i| {
                if classes[i] == tied && i != pick {
                    2 * classes[i] + 1
                } else {
                    2 * classes[i]
                }
            })
            .collect();
        let (c, k) = densify(&split);
        (classes, count) = refine(m, c, k);
    }
    classes
}
