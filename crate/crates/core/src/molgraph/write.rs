use super::{canonical_ranks, default_valence, BondOrder, Element, MolError, MolGraph};

struct Writer<'a> {
    g: &'a MolGraph,
    ranks: Vec<usize>,
    visited: Vec<bool>,
    bond_done: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    opens: Vec<Vec<usize>>,
    closes: Vec<Vec<usize>>,
    digit_of: Vec<usize>,
    free_digits: Vec<bool>,
    out: String,
}

fn has_aromatic_double(g: &MolGraph, i: usize) -> bool {
    g.neighbors(i)
        .iter()
        .any(|&(_, bi)| g.bond(bi).is_aromatic && g.bond(bi).order == BondOrder::Double)
}

/// Mirrors the parser's rule for bare aromatic atoms.
fn bare_aromatic_needs_pi(el: Element, degree: usize) -> bool {
    match el {
        Element::C => true,
        Element::N | Element::P => degree != 3,
        _ => false,
    }
}

impl<'a> Writer<'a> {
    fn dfs(&mut self, u: usize, parent_bond: usize) {
        self.visited[u] = true;
        let mut nbrs: Vec<(usize, usize)> = self.g.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(v, _)| self.ranks[v]);
        for (v, bi) in nbrs {
            if bi == parent_bond || self.bond_done[bi] {
                continue;
            }
            self.bond_done[bi] = true;
            if self.visited[v] {
                self.opens[v].push(bi);
                self.closes[u].push(bi);
            } else {
                self.children[u].push((v, bi));
                self.dfs(v, bi);
            }
        }
    }

    fn atom_token(&self, i: usize) -> String {
        let g = self.g;
        let a = g.atom(i);
        let sym = if a.is_aromatic {
            a.element.symbol().to_ascii_lowercase()
        } else {
            a.element.symbol().to_string()
        };
        let used = g.explicit_valence(i);
        let default_h = default_valence(a.element, 0, used).map(|v| v - used);
        let bare = a.formal_charge == 0
            && a.element.in_organic_subset()
            && default_h == Some(a.implicit_h as u32)
            && (!a.is_aromatic
                || bare_aromatic_needs_pi(a.element, g.degree(i)) == has_aromatic_double(g, i));
        if bare {
            return sym;
        }
        let mut s = String::from("[");
        s.push_str(&sym);
        match a.implicit_h {
            0 => {}
            1 => s.push('H'),
            h => s.push_str(&format!("H{h}")),
        }
        match a.formal_charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            c if c > 0 => s.push_str(&format!("+{c}")),
            c => s.push_str(&format!("-{}", -c)),
        }
        s.push(']');
        s
    }

    fn bond_symbol(&self, bi: usize) -> &'static str {
        let b = self.g.bond(bi);
        if b.is_aromatic {
            return "";
        }
        match b.order {
            BondOrder::Single | BondOrder::Aromatic => {
                if self.g.atom(b.a).is_aromatic && self.g.atom(b.b).is_aromatic {
                    "-"
                } else {
                    ""
                }
            }
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }

    fn push_digit(&mut self, d: usize) {
        if d < 10 {
            self.out.push_str(&d.to_string());
        } else {
            self.out.push_str(&format!("%{d:02}"));
        }
    }

    fn emit(&mut self, u: usize) {
        let tok = self.atom_token(u);
        self.out.push_str(&tok);
        for bi in self.closes[u].clone() {
            self.push_digit(self.digit_of[bi]);
        }
        // digits closed here become free only after this atom's openings
        for bi in self.opens[u].clone() {
            let d = (1..self.free_digits.len())
                .find(|&d| self.free_digits[d])
                .expect("ring digit available");
            self.free_digits[d] = false;
            self.digit_of[bi] = d;
            let sym = self.bond_symbol(bi);
            self.out.push_str(sym);
            self.push_digit(d);
        }
        for bi in self.closes[u].clone() {
            self.free_digits[self.digit_of[bi]] = true;
        }
        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (k, (v, bi)) in children.into_iter().enumerate() {
            let sym = self.bond_symbol(bi);
            if k < last {
                self.out.push('(');
                self.out.push_str(sym);
                self.emit(v);
                self.out.push(')');
            } else {
                self.out.push_str(sym);
                self.emit(v);
            }
        }
    }
}

/// Canonical SMILES: depends only on the graph's isomorphism class (up to
/// unresolved non-automorphic ties, which small molecules rarely have).
pub fn write_canonical_smiles(m: &MolGraph) -> Result<String, MolError> {
    m.require_connected()?;
    let mut g = m.clone();
    g.perceive_aromaticity();
    let ranks = canonical_ranks(&g);
    let n = g.atom_count();
    let start = (0..n).min_by_key(|&i| ranks[i]).unwrap();
    let mut w = Writer {
        g: &g,
        ranks,
        visited: vec![false; n],
        bond_done: vec![false; g.bond_count()],
        children: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
        digit_of: vec![0; g.bond_count()],
        free_digits: vec![true; 100],
        out: String::new(),
    };
    w.dfs(start, usize::MAX);
    w.emit(start);
    Ok(w.out)
}
