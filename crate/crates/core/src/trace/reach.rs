use super::TransactionId;

/// Transitive closure over a set of real transactions.
///
/// Initializers are not stored: by convention every initializer reaches every
/// real transaction and nothing reaches an initializer.
#[derive(Debug, Clone)]
pub struct Reach {
    ids: Vec<TransactionId>,
    words: usize,
    rows: Vec<Vec<u64>>,
}

impl Reach {
    /// `ids` must be sorted; edges touching initializers are ignored.
    pub fn new(ids: Vec<TransactionId>, edges: impl IntoIterator<Item = (TransactionId, TransactionId)>) -> Reach {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        let n = ids.len();
        let words = n.div_ceil(64).max(1);
        let mut rows = vec![vec![0u64; words]; n];
        let mut r = Reach { ids, words, rows: Vec::new() };
        for (a, b) in edges {
            if let (Some(i), Some(j)) = (r.index(a), r.index(b)) {
                rows[i][j / 64] |= 1 << (j % 64);
            }
        }
        // Warshall over bit rows.
        for k in 0..n {
            let (kw, kb) = (k / 64, 1u64 << (k % 64));
            let row_k = rows[k].clone();
            for row in rows.iter_mut() {
                if row[kw] & kb != 0 {
                    for (w, bits) in row.iter_mut().zip(&row_k) {
                        *w |= *bits;
                    }
                }
            }
        }
        r.rows = rows;
        r
    }

    pub fn index(&self, t: TransactionId) -> Option<usize> {
        if t.is_init() {
            return None;
        }
        self.ids.binary_search(&t).ok()
    }

    /// Non-reflexive reachability.
    pub fn reaches(&self, a: TransactionId, b: TransactionId) -> bool {
        if b.is_init() {
            return false;
        }
        if a.is_init() {
            return true;
        }
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.rows[i][j / 64] & (1 << (j % 64)) != 0,
            _ => false,
        }
    }

    pub fn has_cycle(&self) -> bool {
        (0..self.ids.len()).any(|i| self.rows[i][i / 64] & (1 << (i % 64)) != 0)
    }

    pub fn words(&self) -> usize {
        self.words
    }
}
