use std::collections::BTreeMap;

use crate::corpus::Genre;

/// Resolution counts: gold AZPs, attempted (k ≥ 1) and correctly resolved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub gold: usize,
    pub attempted: usize,
    pub hits: usize,
}

impl Counts {
    pub fn recall(&self) -> f64 {
        ratio(self.hits, self.gold)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.hits, self.attempted)
    }

    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    pub fn add(&mut self, other: Counts) {
        self.gold += other.gold;
        self.attempted += other.attempted;
        self.hits += other.hits;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub overall: Counts,
    pub per_genre: BTreeMap<Genre, Counts>,
}

impl Metrics {
    pub fn record(&mut self, genre: Genre, c: Counts) {
        self.overall.add(c);
        self.per_genre.entry(genre).or_default().add(c);
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall()
    }

    pub fn precision(&self) -> f64 {
        self.overall.precision()
    }

    pub fn f_score(&self) -> f64 {
        self.overall.f_score()
    }
}
