//! The exact subset search behind `solve_cov` and `solve_sub`.
//!
//! Preprocessing keeps only *usable* columns — those whose singleton
//! false-failure count fits the budget, since FFR only grows under set
//! union — sorted by ascending id so that depth-first order doubles as the
//! lexicographic tie-break order. Coverage state lives in bit sets over the
//! bad/good row subspaces.

use alloc::vec;
use alloc::vec::Vec;

use crate::bits::Bits;
use crate::example::Label;
use crate::matrix::ResultMatrix;
use crate::subsume::SubsumptionMatrix;

use super::{ceil_eps, floor_eps, StopProbe};

/// Search verdict. `Solved.columns` holds original matrix column indexes in
/// ascending-id order; `stopped` marks a best-effort incumbent returned on
/// cancellation rather than a certified optimum.
pub(crate) enum Outcome {
    Solved { columns: Vec<usize>, stopped: bool },
    Infeasible { max_coverage: f64 },
    Stopped,
}

/// Preprocessed instance: usable columns in ascending id order, their
/// flagged-row fingerprints, and suffix aggregates for admissible bounds.
pub(crate) struct Instance {
    /// Original matrix column per position.
    orig: Vec<usize>,
    /// Per position: which bad rows the assertion flags (fails on).
    bad: Vec<Bits>,
    /// Per position: which good rows the assertion flags.
    good: Vec<Bits>,
    /// `suffix_bad_union[p]` = union of `bad[p..]`; length positions + 1.
    suffix_bad_union: Vec<Bits>,
    /// `suffix_top_sums[p][r]` = sum of the `r` largest singleton
    /// flagged-bad counts among positions `p..`.
    suffix_top_sums: Vec<Vec<usize>>,
    need_cov: usize,
    allow_ffr: usize,
    n_bad: usize,
}

impl Instance {
    pub(crate) fn build(matrix: &ResultMatrix, labels: &[Label], alpha: f64, tau: f64) -> Self {
        let mut bad_rows = Vec::new();
        let mut good_rows = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            if label.is_bad() {
                bad_rows.push(i);
            } else {
                good_rows.push(i);
            }
        }
        let need_cov = ceil_eps(alpha * bad_rows.len() as f64) as usize;
        let allow_ffr = floor_eps(tau * good_rows.len() as f64) as usize;

        let mut cols: Vec<usize> = (0..matrix.n_assertions()).collect();
        cols.sort_by(|&a, &b| matrix.assertion_ids()[a].cmp(&matrix.assertion_ids()[b]));

        let mut orig = Vec::new();
        let mut bad = Vec::new();
        let mut good = Vec::new();
        for &j in &cols {
            let mut good_flags = Bits::new(good_rows.len());
            for (gi, &row) in good_rows.iter().enumerate() {
                if !matrix.passes(row, j) {
                    good_flags.set(gi);
                }
            }
            if good_flags.count() > allow_ffr {
                continue; // can never appear in a feasible selection
            }
            let mut bad_flags = Bits::new(bad_rows.len());
            for (bi, &row) in bad_rows.iter().enumerate() {
                if !matrix.passes(row, j) {
                    bad_flags.set(bi);
                }
            }
            orig.push(j);
            bad.push(bad_flags);
            good.push(good_flags);
        }

        let positions = orig.len();
        let mut suffix_bad_union = vec![Bits::new(bad_rows.len()); positions + 1];
        for p in (0..positions).rev() {
            let mut u = suffix_bad_union[p + 1].clone();
            u.or_assign(&bad[p]);
            suffix_bad_union[p] = u;
        }
        let mut suffix_top_sums = Vec::with_capacity(positions + 1);
        for p in 0..=positions {
            let mut counts: Vec<usize> = (p..positions).map(|q| bad[q].count()).collect();
            counts.sort_unstable_by(|a, b| b.cmp(a));
            let mut sums = Vec::with_capacity(counts.len() + 1);
            let mut acc = 0usize;
            sums.push(0);
            for c in counts {
                acc += c;
                sums.push(acc);
            }
            suffix_top_sums.push(sums);
        }

        Instance {
            orig,
            bad,
            good,
            suffix_bad_union,
            suffix_top_sums,
            need_cov,
            allow_ffr,
            n_bad: bad_rows.len(),
        }
    }

    fn positions(&self) -> usize {
        self.orig.len()
    }

    /// Sum of the `r` largest singleton gains available at or after `p` —
    /// an upper bound on how much bad coverage `r` more picks can add.
    fn top_sum(&self, p: usize, r: usize) -> usize {
        let sums = &self.suffix_top_sums[p];
        sums[r.min(sums.len() - 1)]
    }

    pub(crate) fn max_coverage_fraction(&self) -> f64 {
        if self.n_bad == 0 {
            return 1.0;
        }
        let mut search = Search::new(self, &NO_STOP);
        let best = search.max_cov(None);
        best as f64 / self.n_bad as f64
    }

    pub(crate) fn solve_cov(&self, probe: &dyn StopProbe) -> Outcome {
        if probe.should_stop() {
            return Outcome::Stopped;
        }
        if self.need_cov == 0 {
            // The empty selection is feasible (FFR 0) and trivially minimal.
            return Outcome::Solved {
                columns: Vec::new(),
                stopped: false,
            };
        }
        let mut search = Search::new(self, probe);
        let reachable = search.max_cov(Some(self.need_cov));
        if search.stopped {
            return Outcome::Stopped;
        }
        if reachable < self.need_cov {
            let mut exact = Search::new(self, probe);
            let best = exact.max_cov(None);
            if exact.stopped {
                return Outcome::Stopped;
            }
            return Outcome::Infeasible {
                max_coverage: best as f64 / self.n_bad.max(1) as f64,
            };
        }
        for k in 1..=self.positions() {
            let mut chosen = Vec::with_capacity(k);
            let found = search.lex_cov(
                0,
                k,
                &Bits::new(self.n_bad),
                &Bits::new(self.good_len()),
                &mut chosen,
            );
            if search.stopped {
                return Outcome::Stopped;
            }
            if found {
                return Outcome::Solved {
                    columns: chosen.iter().map(|&p| self.orig[p]).collect(),
                    stopped: false,
                };
            }
        }
        unreachable!("the feasibility check certified a feasible subset exists")
    }

    pub(crate) fn solve_sub(&self, k: &SubsumptionMatrix, probe: &dyn StopProbe) -> Outcome {
        if probe.should_stop() {
            return Outcome::Stopped;
        }
        let mut search = Search::new(self, probe);
        if self.need_cov > 0 {
            let reachable = search.max_cov(Some(self.need_cov));
            if search.stopped {
                return Outcome::Stopped;
            }
            if reachable < self.need_cov {
                let mut exact = Search::new(self, probe);
                let best = exact.max_cov(None);
                if exact.stopped {
                    return Outcome::Stopped;
                }
                return Outcome::Infeasible {
                    max_coverage: best as f64 / self.n_bad.max(1) as f64,
                };
            }
        }
        let mut sub = SubSearch::new(self, k, probe);
        sub.phase1();
        let incumbent: Option<Vec<usize>> =
            sub.best_selection.as_ref().map(|mask| self.decode(mask));
        if sub.search.stopped {
            return match incumbent {
                Some(columns) => Outcome::Solved {
                    columns,
                    stopped: true,
                },
                None => Outcome::Stopped,
            };
        }
        let optimum = sub.best_objective;
        match sub.phase2(optimum) {
            Some(mask) => Outcome::Solved {
                columns: self.decode(&mask),
                stopped: false,
            },
            None => match incumbent {
                Some(columns) => Outcome::Solved {
                    columns,
                    stopped: true,
                },
                None => Outcome::Stopped,
            },
        }
    }

    fn good_len(&self) -> usize {
        self.good.first().map_or(0, |b| b.len())
    }

    /// Positions mask → original column indexes, ascending-id order.
    fn decode(&self, mask: &Bits) -> Vec<usize> {
        (0..self.positions())
            .filter(|&p| mask.get(p))
            .map(|p| self.orig[p])
            .collect()
    }
}

struct NoStop;
static NO_STOP: NoStop = NoStop;
impl StopProbe for NoStop {
    fn should_stop(&self) -> bool {
        false
    }
}

/// Shared DFS plumbing: probe polling and the coverage-maximization search
/// used for feasibility checks and infeasibility diagnostics.
struct Search<'a> {
    inst: &'a Instance,
    probe: &'a dyn StopProbe,
    ticks: u32,
    stopped: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, probe: &'a dyn StopProbe) -> Self {
        Search {
            inst,
            probe,
            ticks: 0,
            stopped: false,
        }
    }

    /// True while the search may continue; polls the probe periodically.
    fn running(&mut self) -> bool {
        if self.stopped {
            return false;
        }
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks & 0xFF == 0 && self.probe.should_stop() {
            self.stopped = true;
        }
        !self.stopped
    }

    /// Best achievable flagged-bad count under the FFR budget; stops early
    /// once `target` is reached (feasibility mode).
    fn max_cov(&mut self, target: Option<usize>) -> usize {
        let mut best = 0usize;
        let cur_bad = Bits::new(self.inst.n_bad);
        let cur_good = Bits::new(self.inst.good_len());
        self.max_cov_dfs(0, &cur_bad, &cur_good, &mut best, target);
        best
    }

    fn max_cov_dfs(
        &mut self,
        p: usize,
        cur_bad: &Bits,
        cur_good: &Bits,
        best: &mut usize,
        target: Option<usize>,
    ) {
        if !self.running() {
            return;
        }
        let count = cur_bad.count();
        if count > *best {
            *best = count;
        }
        if let Some(t) = target {
            if *best >= t {
                return;
            }
        }
        if p == self.inst.positions() {
            return;
        }
        // Nothing past p can push the union above the incumbent.
        if cur_bad.union_count(&self.inst.suffix_bad_union[p]) <= *best {
            return;
        }
        if cur_good.union_count(&self.inst.good[p]) <= self.inst.allow_ffr {
            let mut nb = cur_bad.clone();
            nb.or_assign(&self.inst.bad[p]);
            let mut ng = cur_good.clone();
            ng.or_assign(&self.inst.good[p]);
            self.max_cov_dfs(p + 1, &nb, &ng, best, target);
            if let Some(t) = target {
                if *best >= t {
                    return;
                }
            }
        }
        self.max_cov_dfs(p + 1, cur_bad, cur_good, best, target);
    }

    /// First feasible combination of exactly `rem` more picks from
    /// `start..`, explored in lexicographic order — which, at the minimal
    /// cardinality, is the lexicographically smallest optimal selection.
    fn lex_cov(
        &mut self,
        start: usize,
        rem: usize,
        cur_bad: &Bits,
        cur_good: &Bits,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if !self.running() {
            return false;
        }
        if rem == 0 {
            return cur_bad.count() >= self.inst.need_cov;
        }
        let inst = self.inst;
        for p in start..=(inst.positions() - rem) {
            // Both bounds only shrink as p grows, so a failure ends the loop.
            if cur_bad.union_count(&inst.suffix_bad_union[p]) < inst.need_cov {
                return false;
            }
            if cur_bad.count() + inst.top_sum(p, rem) < inst.need_cov {
                return false;
            }
            // A pick adding no new bad coverage cannot appear in a
            // minimum-cardinality selection (dropping it stays feasible).
            if cur_bad.gain(&inst.bad[p]) == 0 {
                continue;
            }
            if cur_good.union_count(&inst.good[p]) > inst.allow_ffr {
                continue;
            }
            let mut nb = cur_bad.clone();
            nb.or_assign(&inst.bad[p]);
            let mut ng = cur_good.clone();
            ng.or_assign(&inst.good[p]);
            chosen.push(p);
            if self.lex_cov(p + 1, rem - 1, &nb, &ng, chosen) {
                return true;
            }
            if self.stopped {
                return false;
            }
            chosen.pop();
        }
        false
    }
}

/// Branch-and-bound state for the subsumption objective |F′| + |G|.
struct SubSearch<'a> {
    search: Search<'a>,
    /// Total assertion count, including columns too misfire-prone to select.
    m_total: usize,
    /// Per original column: position of its usable form, if any.
    pos_of_orig: Vec<Option<usize>>,
    /// Per original column j: positions whose assertion subsumes j (self
    /// excluded).
    cover: Vec<Bits>,
    /// `suffix_present[p]`: position mask for `p..`.
    suffix_present: Vec<Bits>,
    best_objective: usize,
    best_selection: Option<Bits>,
}

impl<'a> SubSearch<'a> {
    fn new(inst: &'a Instance, k: &SubsumptionMatrix, probe: &'a dyn StopProbe) -> Self {
        let m_total = k.len();
        let positions = inst.positions();
        let mut pos_of_orig = vec![None; m_total];
        for (p, &j) in inst.orig.iter().enumerate() {
            pos_of_orig[j] = Some(p);
        }
        let mut cover = Vec::with_capacity(m_total);
        for j in 0..m_total {
            let mut mask = Bits::new(positions);
            for (p, &i) in inst.orig.iter().enumerate() {
                if i != j && k.subsumes(i, j) {
                    mask.set(p);
                }
            }
            cover.push(mask);
        }
        let mut suffix_present = vec![Bits::new(positions); positions + 1];
        for p in (0..positions).rev() {
            let mut mask = suffix_present[p + 1].clone();
            mask.set(p);
            suffix_present[p] = mask;
        }
        SubSearch {
            search: Search::new(inst, probe),
            m_total,
            pos_of_orig,
            cover,
            suffix_present,
            best_objective: usize::MAX,
            best_selection: None,
        }
    }

    /// |G| for the selection `mask`: columns neither selected nor subsumed
    /// by a selected one.
    fn g_count(&self, mask: &Bits) -> usize {
        (0..self.m_total)
            .filter(|&j| {
                let selected = self.pos_of_orig[j].is_some_and(|q| mask.get(q));
                !selected && !self.cover[j].intersects(mask)
            })
            .count()
    }

    /// Admissible lower bound on the objective for any completion of the
    /// node: selected so far, plus columns already guaranteed to land in G,
    /// plus the larger of (undecided columns that count 1 whichever way
    /// they are decided) and (picks still required for coverage).
    fn lower_bound(&self, p: usize, mask: &Bits, sel_len: usize, cur_bad: &Bits) -> usize {
        let inst = self.search.inst;
        let mut present = mask.clone();
        present.or_assign(&self.suffix_present[p]);
        let mut decided_g = 0usize;
        let mut undecided_floor = 0usize;
        for j in 0..self.m_total {
            match self.pos_of_orig[j] {
                Some(q) if mask.get(q) => continue,
                Some(q) if q >= p => {
                    // Selecting j costs 1; excluding it with no possible
                    // subsumer left also costs 1.
                    if !self.cover[j].intersects(&present) {
                        undecided_floor += 1;
                    }
                }
                _ => {
                    if !self.cover[j].intersects(&present) {
                        decided_g += 1;
                    }
                }
            }
        }
        let covered = cur_bad.count();
        let needed_picks = if covered >= inst.need_cov {
            0
        } else {
            let deficit = inst.need_cov - covered;
            let sums = &inst.suffix_top_sums[p];
            match sums.iter().position(|&s| s >= deficit) {
                Some(r) => r,
                None => return usize::MAX, // coverage unreachable from here
            }
        };
        sel_len + decided_g + undecided_floor.max(needed_picks)
    }

    fn phase1(&mut self) {
        let inst = self.search.inst;
        let mask = Bits::new(inst.positions());
        let cur_bad = Bits::new(inst.n_bad);
        let cur_good = Bits::new(inst.good_len());
        self.phase1_dfs(0, &mask, 0, &cur_bad, &cur_good, true);
    }

    fn phase1_dfs(
        &mut self,
        p: usize,
        mask: &Bits,
        sel_len: usize,
        cur_bad: &Bits,
        cur_good: &Bits,
        fresh: bool,
    ) {
        if !self.search.running() {
            return;
        }
        let inst = self.search.inst;
        if cur_bad.union_count(&inst.suffix_bad_union[p]) < inst.need_cov {
            return;
        }
        // "Stop here" is itself a completion; evaluate it whenever the
        // selection changed (the exclude chain re-visits the same set).
        if fresh && cur_bad.count() >= inst.need_cov {
            let objective = sel_len + self.g_count(mask);
            if objective < self.best_objective {
                self.best_objective = objective;
                self.best_selection = Some(mask.clone());
            }
        }
        if p == inst.positions() {
            return;
        }
        if self.lower_bound(p, mask, sel_len, cur_bad) >= self.best_objective {
            return;
        }
        if cur_good.union_count(&inst.good[p]) <= inst.allow_ffr {
            let mut nm = mask.clone();
            nm.set(p);
            let mut nb = cur_bad.clone();
            nb.or_assign(&inst.bad[p]);
            let mut ng = cur_good.clone();
            ng.or_assign(&inst.good[p]);
            self.phase1_dfs(p + 1, &nm, sel_len + 1, &nb, &ng, true);
        }
        self.phase1_dfs(p + 1, mask, sel_len, cur_bad, cur_good, false);
    }

    /// Reconstructs the lexicographically smallest selection achieving
    /// `optimum`: prefer stopping (shorter lists precede their extensions),
    /// otherwise fix the earliest position that still admits an optimal
    /// completion.
    fn phase2(&mut self, optimum: usize) -> Option<Bits> {
        let inst = self.search.inst;
        let mut mask = Bits::new(inst.positions());
        let mut sel_len = 0usize;
        let mut cur_bad = Bits::new(inst.n_bad);
        let mut cur_good = Bits::new(inst.good_len());
        let mut p = 0usize;
        loop {
            if cur_bad.count() >= inst.need_cov && sel_len + self.g_count(&mask) == optimum {
                return Some(mask);
            }
            let mut advanced = false;
            for j in p..inst.positions() {
                if cur_good.union_count(&inst.good[j]) > inst.allow_ffr {
                    continue;
                }
                let mut try_mask = mask.clone();
                try_mask.set(j);
                let mut nb = cur_bad.clone();
                nb.or_assign(&inst.bad[j]);
                let mut ng = cur_good.clone();
                ng.or_assign(&inst.good[j]);
                if self.exists_completion(j + 1, &try_mask, sel_len + 1, &nb, &ng, optimum) {
                    mask = try_mask;
                    sel_len += 1;
                    cur_bad = nb;
                    cur_good = ng;
                    p = j + 1;
                    advanced = true;
                    break;
                }
                if self.search.stopped {
                    return None;
                }
            }
            if !advanced {
                debug_assert!(
                    false,
                    "phase 1 certified the optimum is achievable from this prefix"
                );
                return None;
            }
        }
    }

    /// Can the node complete to objective exactly `optimum`? (The global
    /// minimum, so "exactly" and "at most" coincide.)
    fn exists_completion(
        &mut self,
        p: usize,
        mask: &Bits,
        sel_len: usize,
        cur_bad: &Bits,
        cur_good: &Bits,
        optimum: usize,
    ) -> bool {
        if !self.search.running() {
            return false;
        }
        let inst = self.search.inst;
        if cur_bad.union_count(&inst.suffix_bad_union[p]) < inst.need_cov {
            return false;
        }
        if cur_bad.count() >= inst.need_cov && sel_len + self.g_count(mask) == optimum {
            return true;
        }
        if p == inst.positions() {
            return false;
        }
        if self.lower_bound(p, mask, sel_len, cur_bad) > optimum {
            return false;
        }
        if cur_good.union_count(&inst.good[p]) <= inst.allow_ffr {
            let mut nm = mask.clone();
            nm.set(p);
            let mut nb = cur_bad.clone();
            nb.or_assign(&inst.bad[p]);
            let mut ng = cur_good.clone();
            ng.or_assign(&inst.good[p]);
            if self.exists_completion(p + 1, &nm, sel_len + 1, &nb, &ng, optimum) {
                return true;
            }
            if self.search.stopped {
                return false;
            }
        }
        self.exists_completion(p + 1, mask, sel_len, cur_bad, cur_good, optimum)
    }
}
