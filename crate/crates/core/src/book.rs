//! Reservation book: future occupancy of slot classes and vertipads.
//!
//! Pad rules, for every vertiport `v` with `N_v` pads and every step `s`:
//! takeoffs from `v` in `[s-k+1, s]` are at most `N_v`, and takeoffs at `s`
//! plus landings in `[s-k+1, s]` are at most `N_v`. A flight of pair `p`
//! taking off at `n` holds interior slot `i` at step `n+i` and lands at
//! `n + flight_steps`.

use crate::network::{NetworkSpec, PairId, SlotSystem, Step};

#[derive(Debug, Clone)]
pub struct ReservationBook<'a> {
    net: &'a NetworkSpec,
    slots: &'a SlotSystem,
    k: i64,
    /// first step represented in the dense arrays
    base: Step,
    /// per class, occupied flag per step
    class_busy: Vec<Vec<bool>>,
    takeoffs: Vec<Vec<u32>>,
    landings: Vec<Vec<u32>>,
}

impl<'a> ReservationBook<'a> {
    pub fn new(net: &'a NetworkSpec, slots: &'a SlotSystem, base: Step) -> Self {
        Self {
            net,
            slots,
            k: net.k_tau as i64,
            base,
            class_busy: vec![Vec::new(); slots.total_distinct()],
            takeoffs: vec![Vec::new(); net.vertiports.len()],
            landings: vec![Vec::new(); net.vertiports.len()],
        }
    }

    pub fn network(&self) -> &'a NetworkSpec {
        self.net
    }

    pub fn slot_system(&self) -> &'a SlotSystem {
        self.slots
    }

    /// A copy that keeps only what can still constrain flights at or after `from`.
    pub fn window_from(&self, from: Step) -> Self {
        let new_base = (from - self.k).max(self.base);
        let cut = (new_base - self.base) as usize;
        let trim = |rows: &Vec<Vec<u32>>| -> Vec<Vec<u32>> {
            rows.iter()
                .map(|r| r.get(cut..).map(<[u32]>::to_vec).unwrap_or_default())
                .collect()
        };
        Self {
            net: self.net,
            slots: self.slots,
            k: self.k,
            base: new_base,
            class_busy: self
                .class_busy
                .iter()
                .map(|r| r.get(cut..).map(<[bool]>::to_vec).unwrap_or_default())
                .collect(),
            takeoffs: trim(&self.takeoffs),
            landings: trim(&self.landings),
        }
    }

    fn idx(&self, s: Step) -> Option<usize> {
        (s >= self.base).then(|| (s - self.base) as usize)
    }

    fn count(row: &[u32], i: Option<usize>) -> u32 {
        i.and_then(|i| row.get(i).copied()).unwrap_or(0)
    }

    fn window(&self, row: &[u32], s: Step) -> u32 {
        (s - self.k + 1..=s).map(|t| Self::count(row, self.idx(t))).sum()
    }

    pub fn class_busy(&self, class: usize, s: Step) -> bool {
        self.idx(s)
            .and_then(|i| self.class_busy[class].get(i).copied())
            .unwrap_or(false)
    }

    pub fn takeoffs_at(&self, v: usize, s: Step) -> u32 {
        Self::count(&self.takeoffs[v], self.idx(s))
    }

    pub fn landings_at(&self, v: usize, s: Step) -> u32 {
        Self::count(&self.landings[v], self.idx(s))
    }

    /// Whether a flight of `p` taking off at `n` fits next to every reservation.
    pub fn can_fly(&self, p: PairId, n: Step) -> bool {
        if n < self.base {
            return false;
        }
        let pair = self.net.pair(p);
        let o = pair.origin.0;
        let d = pair.destination.0;
        let pads_o = self.net.vertiports[o].num_vertipads;
        let pads_d = self.net.vertiports[d].num_vertipads;
        for (i, class) in self.slots.interior(p) {
            if self.class_busy(class, n + i as i64) {
                return false;
            }
        }
        // takeoff separation: every window containing n
        for s in n..n + self.k {
            if self.window(&self.takeoffs[o], s) + 1 > pads_o {
                return false;
            }
        }
        // the takeoff against recent landings
        if self.takeoffs_at(o, n) + 1 + self.window(&self.landings[o], n) > pads_o {
            return false;
        }
        // the landing against takeoffs and landings in the following windows
        let land = n + pair.flight_steps as i64;
        for s in land..land + self.k {
            if self.takeoffs_at(d, s) + self.window(&self.landings[d], s) + 1 > pads_d {
                return false;
            }
        }
        true
    }

    /// Earliest step `>= from` at which `p` can take off.
    pub fn earliest(&self, p: PairId, from: Step) -> Step {
        let mut n = from.max(self.base);
        while !self.can_fly(p, n) {
            n += 1;
        }
        n
    }

    fn bump(row: &mut Vec<u32>, i: usize) {
        if row.len() <= i {
            row.resize(i + 1, 0);
        }
        row[i] += 1;
    }

    /// Records a flight without checking it.
    pub fn commit(&mut self, p: PairId, n: Step) {
        let pair = self.net.pair(p);
        let (o, d, f) = (pair.origin.0, pair.destination.0, pair.flight_steps as i64);
        let base = self.base;
        for (i, class) in self.slots.interior(p) {
            let s = n + i as i64;
            if s >= base {
                let row = &mut self.class_busy[class];
                let j = (s - base) as usize;
                if row.len() <= j {
                    row.resize(j + 1, false);
                }
                row[j] = true;
            }
        }
        if n >= base {
            Self::bump(&mut self.takeoffs[o], (n - base) as usize);
        }
        if n + f >= base {
            Self::bump(&mut self.landings[d], (n + f - base) as usize);
        }
    }
}
