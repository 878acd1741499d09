//! Bookkeeping for concatenated realizable flows.

use crate::error::{Error, Result};
use crate::symplectic::Vec4;

/// Tolerance on the match between consecutive schedule endpoints.
pub const BASE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub alpha: f64,
    pub r: f64,
    pub nu: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSchedule {
    pub base: Vec4,
    /// `phi^length_t(base)`.
    pub end: Vec4,
    pub length_t: f64,
    pub segments: Vec<Segment>,
    pub kappa_budget: f64,
    pub epsilon: f64,
}

impl RealizationSchedule {
    /// Length-zero schedule at `base`; neutral for [`concatenate`].
    pub fn empty(base: Vec4) -> Self {
        Self { base, end: base, length_t: 0.0, segments: Vec::new(), kappa_budget: 0.0, epsilon: 0.0 }
    }

    /// A single unit-length rotation segment.
    pub fn unit(base: Vec4, end: Vec4, segment: Segment, epsilon: f64) -> Result<Self> {
        let s = Self {
            base,
            end,
            length_t: 1.0,
            segments: vec![Segment { start: 0.0, ..segment }],
            kappa_budget: segment.kappa,
            epsilon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.kappa_budget) {
            return Err(Error::Schedule(format!("kappa budget {} outside [0, 1)", self.kappa_budget)));
        }
        let mut prev_end = 0.0;
        let mut kappa = 0.0;
        for s in &self.segments {
            if s.start < prev_end - 1e-12 {
                return Err(Error::Schedule(format!("segment at {} overlaps its predecessor", s.start)));
            }
            prev_end = s.start + 1.0;
            kappa += s.kappa;
        }
        if prev_end > self.length_t + 1e-12 {
            return Err(Error::Schedule(format!("segments end at {prev_end} past length {}", self.length_t)));
        }
        if kappa > self.kappa_budget + 1e-12 {
            return Err(Error::Schedule(format!("segment kappa {kappa} exceeds budget {}", self.kappa_budget)));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> String {
        let v = |y: &Vec4| format!("{},{},{},{}", y[0], y[1], y[2], y[3]);
        let mut s = format!(
            "base={}\nend={}\nlength_t={}\nkappa_budget={}\nepsilon={}\nsegments={}\n",
            v(&self.base),
            v(&self.end),
            self.length_t,
            self.kappa_budget,
            self.epsilon,
            self.segments.len()
        );
        for (i, g) in self.segments.iter().enumerate() {
            s.push_str(&format!(
                "segment.{i}={},{},{},{},{}\n",
                g.start, g.alpha, g.r, g.nu, g.kappa
            ));
        }
        s
    }
}

/// Runs `s1` then `s2`. Requires `s2.base` to be the endpoint of `s1`, and
/// the bad-set budgets to sum below one.
pub fn concatenate(s1: &RealizationSchedule, s2: &RealizationSchedule) -> Result<RealizationSchedule> {
    let gap = (s2.base - s1.end).norm();
    if gap > BASE_TOL * (1.0 + s1.end.norm()) {
        return Err(Error::Schedule(format!("second schedule starts {gap} away from the first endpoint")));
    }
    let kappa = s1.kappa_budget + s2.kappa_budget;
    if kappa >= 1.0 {
        return Err(Error::Schedule(format!("kappa budgets sum to {kappa}")));
    }
    let mut segments = s1.segments.clone();
    segments.extend(s2.segments.iter().map(|s| Segment { start: s.start + s1.length_t, ..*s }));
    let out = RealizationSchedule {
        base: s1.base,
        end: s2.end,
        length_t: s1.length_t + s2.length_t,
        segments,
        kappa_budget: kappa,
        epsilon: s1.epsilon.max(s2.epsilon),
    };
    out.validate()?;
    Ok(out)
}
