use crate::scalar::{Ext, Scalar};

/// A finitely supported zero-mean law with its G levels precomputed.
///
/// Generic over the scalar so that rational inputs are handled exactly.
#[derive(Clone, Debug)]
pub struct AtomTable<S> {
    pub(crate) locs: Vec<S>,
    pub(crate) masses: Vec<S>,
    /// Inclusive cumulative masses in location order.
    pub(crate) cdf: Vec<S>,
    /// Indices of positive atoms, increasing location.
    pub(crate) pos: Vec<usize>,
    /// Indices of negative atoms, decreasing location.
    pub(crate) neg: Vec<usize>,
    /// `G` at each positive atom (inclusive).
    pub(crate) g_pos: Vec<S>,
    pub(crate) g_neg: Vec<S>,
    pub(crate) zero: Option<usize>,
    pub(crate) m: S,
}

/// A maximal h-interval `(lo, hi]` on which `x_+` and `x_-` are constant.
#[derive(Clone, Debug, PartialEq)]
pub struct HInterval<S> {
    pub lo: S,
    pub hi: S,
    /// Location index of the positive atom `x_+(h)`.
    pub pos: usize,
    /// Location index of the negative atom `x_-(h)`.
    pub neg: usize,
}

/// A u-segment `(u_lo, u_hi]` of one atom on which `r(x, .)` is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct USegment<S> {
    pub u_lo: S,
    pub u_hi: S,
    pub partner: S,
}

impl<S: Scalar> AtomTable<S> {
    /// `atoms` must be sorted by location, merged and carry positive masses;
    /// both half-lines must be charged.
    pub(crate) fn build(atoms: Vec<(S, S)>) -> Self {
        let (locs, masses): (Vec<S>, Vec<S>) = atoms.into_iter().unzip();
        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = S::zero();
        for p in &masses {
            acc = acc + p.clone();
            cdf.push(acc.clone());
        }
        let zero = locs.iter().position(|x| x.is_zero());
        let pos: Vec<usize> = (0..locs.len()).filter(|&i| locs[i] > S::zero()).collect();
        let neg: Vec<usize> = (0..locs.len()).rev().filter(|&i| locs[i] < S::zero()).collect();
        let cumulate = |idx: &[usize]| {
            let mut acc = S::zero();
            idx.iter()
                .map(|&i| {
                    acc = acc.clone() + locs[i].abs_val() * masses[i].clone();
                    acc.clone()
                })
                .collect::<Vec<S>>()
        };
        let mut g_pos = cumulate(&pos);
        let mut g_neg = cumulate(&neg);
        let mp = g_pos.last().cloned().unwrap_or_else(S::zero);
        let mn = g_neg.last().cloned().unwrap_or_else(S::zero);
        let m = (mp.clone() + mn.clone()) / S::from_int(2);
        // Within the mean tolerance the two sides may differ by rounding;
        // both are pinned to the common terminal value m.
        for (levels, total) in [(&mut g_pos, mp), (&mut g_neg, mn)] {
            if total != m && !total.is_zero() {
                let ratio = m.clone() / total;
                for g in levels.iter_mut() {
                    *g = g.clone() * ratio.clone();
                }
                if let Some(last) = levels.last_mut() {
                    *last = m.clone();
                }
            }
        }
        AtomTable { locs, masses, cdf, pos, neg, g_pos, g_neg, zero, m }
    }

    pub fn m(&self) -> &S {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    pub fn locations(&self) -> &[S] {
        &self.locs
    }

    pub fn masses(&self) -> &[S] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&S, &S)> {
        self.locs.iter().zip(self.masses.iter())
    }

    pub fn mass_at(&self, x: &S) -> S {
        match self.locs.binary_search_by(|l| l.partial_cmp(x).unwrap()) {
            Ok(i) => self.masses[i].clone(),
            Err(_) => S::zero(),
        }
    }

    /// `G(x)`; `G(+-inf) = m`.
    pub fn g(&self, x: &Ext<S>) -> S {
        match x {
            Ext::NegInf | Ext::PosInf => self.m.clone(),
            Ext::Finite(v) if *v >= S::zero() => {
                let k = self.pos.partition_point(|&i| self.locs[i] <= *v);
                level(&self.g_pos, k)
            }
            Ext::Finite(v) => {
                let k = self.neg.partition_point(|&i| self.locs[i] >= *v);
                level(&self.g_neg, k)
            }
        }
    }

    /// Limit of `G` from the side of zero: `G(x-)` for `x > 0`, `G(x+)` for `x < 0`.
    pub fn g_inner(&self, x: &Ext<S>) -> S {
        match x {
            Ext::NegInf | Ext::PosInf => self.m.clone(),
            Ext::Finite(v) if *v >= S::zero() => {
                let k = self.pos.partition_point(|&i| self.locs[i] < *v);
                level(&self.g_pos, k)
            }
            Ext::Finite(v) => {
                let k = self.neg.partition_point(|&i| self.locs[i] > *v);
                level(&self.g_neg, k)
            }
        }
    }

    pub fn g_tilde(&self, x: &Ext<S>, u: &S) -> S {
        let inner = self.g_inner(x);
        let outer = self.g(x);
        inner.clone() + (outer - inner) * u.clone()
    }

    /// `inf{x >= 0 : G(x) >= h}`.
    pub fn x_plus(&self, h: &S) -> Ext<S> {
        if *h <= S::zero() {
            return Ext::zero();
        }
        let k = self.g_pos.partition_point(|g| !g.ge_within(h, &self.m));
        match self.pos.get(k) {
            Some(&i) => Ext::Finite(self.locs[i].clone()),
            None => Ext::PosInf,
        }
    }

    /// `sup{x <= 0 : G(x) >= h}`.
    pub fn x_minus(&self, h: &S) -> Ext<S> {
        if *h <= S::zero() {
            return Ext::zero();
        }
        let k = self.g_neg.partition_point(|g| !g.ge_within(h, &self.m));
        match self.neg.get(k) {
            Some(&i) => Ext::Finite(self.locs[i].clone()),
            None => Ext::NegInf,
        }
    }

    pub fn reciprocate(&self, x: &Ext<S>, u: &S) -> Ext<S> {
        let h = self.g_tilde(x, u);
        if x.is_nonneg() {
            self.x_minus(&h)
        } else {
            self.x_plus(&h)
        }
    }

    pub fn regularize(&self, x: &Ext<S>, u: &S) -> Ext<S> {
        let h = self.g_tilde(x, u);
        if x.is_nonneg() {
            self.x_plus(&h)
        } else {
            self.x_minus(&h)
        }
    }

    /// The `v` with `r(r(x, u), v) = x_hat(x, u)`.
    pub fn v_map(&self, x: &Ext<S>, u: &S) -> S {
        let h = self.g_tilde(x, u);
        let y = self.reciprocate(x, u);
        let gy = self.g(&y);
        let inner = self.g_inner(&y);
        if gy == inner {
            return S::one();
        }
        let v = (h - inner.clone()) / (gy - inner);
        if v < S::zero() {
            S::zero()
        } else if v > S::one() {
            S::one()
        } else {
            v
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: &S) -> S {
        let k = self.locs.partition_point(|l| l <= x);
        level(&self.cdf, k)
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: &S) -> S {
        let k = self.locs.partition_point(|l| l < x);
        level(&self.cdf, k)
    }

    pub fn f_tilde(&self, x: &S, u: &S) -> S {
        let left = self.cdf_left(x);
        let right = self.cdf(x);
        left.clone() + (right - left) * u.clone()
    }

    /// Whether `G` is even, checked at every atom magnitude.
    pub fn is_symmetric(&self, tol: &S) -> bool {
        self.locs.iter().filter(|x| !x.is_zero()).all(|x| {
            let a = x.abs_val();
            let d = self.g(&Ext::Finite(a.clone())) - self.g(&Ext::Finite(-a));
            d.abs_val() <= *tol
        })
    }

    /// Merges positive and negative G levels into maximal constant pieces.
    pub fn h_intervals(&self) -> Vec<HInterval<S>> {
        let mut out = Vec::with_capacity(self.pos.len() + self.neg.len());
        let (mut i, mut j) = (0, 0);
        let mut lo = S::zero();
        while i < self.g_pos.len() && j < self.g_neg.len() {
            let p = &self.g_pos[i];
            let n = &self.g_neg[j];
            let (hi, step_i, step_j) = if p.eq_within(n, &self.m) {
                (p.clone(), true, true)
            } else if p < n {
                (p.clone(), true, false)
            } else {
                (n.clone(), false, true)
            };
            if hi > lo {
                out.push(HInterval {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    pos: self.pos[i],
                    neg: self.neg[j],
                });
                lo = hi;
            }
            i += step_i as usize;
            j += step_j as usize;
        }
        out
    }

    /// Per-atom u-segments of the reciprocating function, in location order.
    pub fn u_segments(&self) -> Vec<Vec<USegment<S>>> {
        let mut segs: Vec<Vec<USegment<S>>> = vec![Vec::new(); self.locs.len()];
        if let Some(z) = self.zero {
            segs[z].push(USegment { u_lo: S::zero(), u_hi: S::one(), partner: S::zero() });
        }
        let prev_level = |levels: &[S], k: usize| if k == 0 { S::zero() } else { levels[k - 1].clone() };
        let pos_rank: Vec<usize> = rank(&self.pos, self.locs.len());
        let neg_rank: Vec<usize> = rank(&self.neg, self.locs.len());
        for iv in self.h_intervals() {
            for (atom, partner, levels, rk) in [
                (iv.pos, iv.neg, &self.g_pos, &pos_rank),
                (iv.neg, iv.pos, &self.g_neg, &neg_rank),
            ] {
                let k = rk[atom];
                let prev = prev_level(levels, k);
                let span = levels[k].clone() - prev.clone();
                segs[atom].push(USegment {
                    u_lo: clamp01((iv.lo.clone() - prev.clone()) / span.clone()),
                    u_hi: clamp01((iv.hi.clone() - prev) / span),
                    partner: self.locs[partner].clone(),
                });
            }
        }
        for list in segs.iter_mut() {
            if let Some(first) = list.first_mut() {
                first.u_lo = S::zero();
            }
            if let Some(last) = list.last_mut() {
                last.u_hi = S::one();
            }
        }
        segs
    }

    /// Converts to a floating-point table with the same levels.
    pub fn to_f64_table(&self) -> AtomTable<f64> {
        AtomTable {
            locs: self.locs.iter().map(S::to_f64).collect(),
            masses: self.masses.iter().map(S::to_f64).collect(),
            cdf: self.cdf.iter().map(S::to_f64).collect(),
            pos: self.pos.clone(),
            neg: self.neg.clone(),
            g_pos: self.g_pos.iter().map(S::to_f64).collect(),
            g_neg: self.g_neg.iter().map(S::to_f64).collect(),
            zero: self.zero,
            m: self.m.to_f64(),
        }
    }
}

fn level<S: Scalar>(levels: &[S], k: usize) -> S {
    if k == 0 {
        S::zero()
    } else {
        levels[k - 1].clone()
    }
}

fn clamp01<S: Scalar>(v: S) -> S {
    if v < S::zero() {
        S::zero()
    } else if v > S::one() {
        S::one()
    } else {
        v
    }
}

fn rank(order: &[usize], n: usize) -> Vec<usize> {
    let mut r = vec![usize::MAX; n];
    for (k, &i) in order.iter().enumerate() {
        r[i] = k;
    }
    r
}
