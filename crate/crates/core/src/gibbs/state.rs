use crate::error::{Error, Result};
use crate::ingest::{Code, PivSpec, MISSING};

/// One configuration of the latent variables: true values of both files and a one-to-one
/// linkage between their records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentState {
    n_pivs: usize,
    h_a: Vec<Code>,
    h_b: Vec<Code>,
    link_of_row: Vec<Option<usize>>,
    link_of_col: Vec<Option<usize>>,
    n_links: usize,
}

impl LatentState {
    /// State with the given true values (row-major, `n_pivs` per record) and no links.
    pub fn unlinked(n_pivs: usize, h_a: Vec<Code>, h_b: Vec<Code>) -> Self {
        let n_a = h_a.len() / n_pivs.max(1);
        let n_b = h_b.len() / n_pivs.max(1);
        LatentState {
            n_pivs,
            h_a,
            h_b,
            link_of_row: vec![None; n_a],
            link_of_col: vec![None; n_b],
            n_links: 0,
        }
    }

    pub fn n_pivs(&self) -> usize {
        self.n_pivs
    }

    pub fn n_a(&self) -> usize {
        self.link_of_row.len()
    }

    pub fn n_b(&self) -> usize {
        self.link_of_col.len()
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    #[inline]
    pub fn h_a(&self, i: usize) -> &[Code] {
        &self.h_a[i * self.n_pivs..(i + 1) * self.n_pivs]
    }

    #[inline]
    pub fn h_b(&self, j: usize) -> &[Code] {
        &self.h_b[j * self.n_pivs..(j + 1) * self.n_pivs]
    }

    pub fn h_a_mut(&mut self, i: usize) -> &mut [Code] {
        &mut self.h_a[i * self.n_pivs..(i + 1) * self.n_pivs]
    }

    pub fn h_b_mut(&mut self, j: usize) -> &mut [Code] {
        &mut self.h_b[j * self.n_pivs..(j + 1) * self.n_pivs]
    }

    /// True values of one file, mutable, alongside that file's link table.
    pub(crate) fn truths_with_links_mut(&mut self, file_a: bool) -> (&mut [Code], &[Option<usize>]) {
        if file_a {
            (&mut self.h_a, &self.link_of_row)
        } else {
            (&mut self.h_b, &self.link_of_col)
        }
    }

    pub(crate) fn split_truths_mut(&mut self, i: usize, j: usize) -> (&mut [Code], &mut [Code]) {
        let k = self.n_pivs;
        (
            &mut self.h_a[i * k..(i + 1) * k],
            &mut self.h_b[j * k..(j + 1) * k],
        )
    }

    #[inline]
    pub fn link_of_row(&self, i: usize) -> Option<usize> {
        self.link_of_row[i]
    }

    #[inline]
    pub fn link_of_col(&self, j: usize) -> Option<usize> {
        self.link_of_col[j]
    }

    /// Linked pairs in row order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.link_of_row
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
    }

    /// Links `i` and `j`. Both must be free.
    pub fn link(&mut self, i: usize, j: usize) {
        debug_assert!(self.link_of_row[i].is_none() && self.link_of_col[j].is_none());
        self.link_of_row[i] = Some(j);
        self.link_of_col[j] = Some(i);
        self.n_links += 1;
    }

    /// Removes the link of row `i`, if any.
    pub fn unlink_row(&mut self, i: usize) {
        if let Some(j) = self.link_of_row[i].take() {
            self.link_of_col[j] = None;
            self.n_links -= 1;
        }
    }

    /// Checks the one-to-one constraint, latent agreement of linked pairs on stable PIVs,
    /// and that every true value lies in its support.
    pub fn check_invariants(&self, specs: &[PivSpec]) -> Result<()> {
        let fail = |m: String| Err(Error::Numeric(format!("latent state invariant: {m}")));
        let mut count = 0;
        for (i, j) in self.links() {
            count += 1;
            if self.link_of_col[j] != Some(i) {
                return fail(format!("row {i} -> column {j} is not mirrored"));
            }
            for (k, s) in specs.iter().enumerate() {
                if s.stable && self.h_a(i)[k] != self.h_b(j)[k] {
                    return fail(format!("link ({i},{j}) disagrees on stable PIV '{}'", s.name));
                }
            }
        }
        let cols = self.link_of_col.iter().flatten().count();
        if count != self.n_links || cols != self.n_links {
            return fail(format!(
                "link count {} vs {count} rows / {cols} columns",
                self.n_links
            ));
        }
        for h in [&self.h_a, &self.h_b] {
            for (idx, &v) in h.iter().enumerate() {
                let s = &specs[idx % self.n_pivs];
                if v == MISSING || v as usize > s.support_size {
                    return fail(format!("true value {v} outside support of '{}'", s.name));
                }
            }
        }
        Ok(())
    }
}
