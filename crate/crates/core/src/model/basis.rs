//! Fixed-particle-number Fock bases.

use std::collections::HashMap;

use crate::{Error, Result};

/// Default refusal threshold for the dimension of a single sector.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Number of bosonic configurations of `n` particles on `m` sites, C(n+m−1, n).
pub fn sector_dimension(m_sites: usize, n: usize) -> u128 {
    if m_sites == 0 {
        return u128::from(n == 0);
    }
    let mut acc: u128 = 1;
    for k in 1..=n as u128 {
        acc = acc * (m_sites as u128 - 1 + k) / k;
    }
    acc
}

/// All occupation vectors of `n` bosons on `m_sites` sites, ordered
/// lexicographically descending: the first state is |n, 0, …, 0⟩.
#[derive(Debug, Clone)]
pub struct FockBasis {
    m_sites: usize,
    n: usize,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

impl FockBasis {
    pub fn new(m_sites: usize, n: usize) -> Result<Self> {
        Self::with_cap(m_sites, n, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(m_sites: usize, n: usize, cap: usize) -> Result<Self> {
        if m_sites == 0 {
            return Err(Error::InvalidParameter { field: "m_sites", reason: "need at least one site".into() });
        }
        if n > u16::MAX as usize {
            return Err(Error::InvalidParameter { field: "n", reason: format!("{n} particles") });
        }
        let dim = sector_dimension(m_sites, n);
        if dim > cap as u128 {
            return Err(Error::DimensionCap { m_sites, n, dim, cap });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut current = vec![0u16; m_sites];
        enumerate(&mut current, 0, n, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { m_sites, n, states, index })
    }

    pub fn m_sites(&self) -> usize {
        self.m_sites
    }

    /// Total particle number of the sector.
    pub fn sector(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn occupation(&self, idx: usize) -> &[u16] {
        &self.states[idx]
    }

    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[u16])> {
        self.states.iter().enumerate().map(|(i, s)| (i, s.as_slice()))
    }
}

fn enumerate(current: &mut [u16], site: usize, remaining: usize, out: &mut Vec<Vec<u16>>) {
    if site == current.len() - 1 {
        current[site] = remaining as u16;
        out.push(current.to_vec());
        current[site] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[site] = k as u16;
        enumerate(current, site + 1, remaining - k, out);
    }
    current[site] = 0;
}
