//! VFLD binary snapshots: a fixed little-endian header followed by
//! `3 Nx Ny Nz` physical-grid values, component-major and x-fastest.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ChannelGrid, SpectralField};
use crate::solver::SolverState;

pub const MAGIC: [u8; 4] = *b"VFLD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 1 + 3 * 4 + 5 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DomainKind {
    Channel = 0,
    Ball = 1,
    PeriodicBox = 2,
}

impl DomainKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(DomainKind::Channel),
            1 => Ok(DomainKind::Ball),
            2 => Ok(DomainKind::PeriodicBox),
            other => Err(Error::ConfigInvalid(format!("unknown domain kind {other} in snapshot"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub domain_kind: DomainKind,
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub nu: f64,
    pub zeta: f64,
}

impl SnapshotHeader {
    pub fn channel(grid: &ChannelGrid, t: f64, nu: f64, zeta: f64) -> Self {
        SnapshotHeader {
            domain_kind: DomainKind::Channel,
            nx: grid.nx as u32,
            ny: grid.ny as u32,
            nz: grid.nz as u32,
            lx: grid.lx,
            ly: grid.ly,
            t,
            nu,
            zeta,
        }
    }

    pub fn payload_len(&self) -> usize {
        3 * self.nx as usize * self.ny as usize * self.nz as usize
    }

    fn to_bytes(self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN);
        b.extend_from_slice(&MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(self.domain_kind as u8);
        for n in [self.nx, self.ny, self.nz] {
            b.extend_from_slice(&n.to_le_bytes());
        }
        for v in [self.lx, self.ly, self.t, self.nu, self.zeta] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < 4 {
            return Err(Error::BadMagic([b.first().copied().unwrap_or(0), 0, 0, 0]));
        }
        let magic: [u8; 4] = b[..4].try_into().expect("length checked");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if b.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: b.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("in bounds"));
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("in bounds"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        Ok(SnapshotHeader {
            domain_kind: DomainKind::from_u8(b[8])?,
            nx: u32_at(9),
            ny: u32_at(13),
            nz: u32_at(17),
            lx: f64_at(21),
            ly: f64_at(29),
            t: f64_at(37),
            nu: f64_at(45),
            zeta: f64_at(53),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    /// physical-grid values, component-major, x fastest
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(u: &SpectralField, t: f64, nu: f64, zeta: f64) -> Self {
        Snapshot { header: SnapshotHeader::channel(&u.grid, t, nu, zeta), values: u.to_grid_values() }
    }

    pub fn from_state(state: &SolverState, nu: f64, zeta: f64) -> Self {
        Self::from_field(&state.u, state.t, nu, zeta)
    }

    pub fn grid(&self) -> Result<ChannelGrid> {
        let h = &self.header;
        if h.domain_kind != DomainKind::Channel {
            return Err(Error::ConfigInvalid(format!("snapshot domain {:?} is not a channel", h.domain_kind)));
        }
        ChannelGrid::new(h.nx as usize, h.ny as usize, h.nz as usize, h.lx, h.ly)
    }

    /// Spectral field of a channel snapshot.
    pub fn to_field(&self) -> Result<SpectralField> {
        SpectralField::from_grid_values(self.grid()?, &self.values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.header.to_bytes();
        b.reserve(8 * self.values.len());
        for v in &self.values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let header = SnapshotHeader::from_bytes(b)?;
        let expected = header.payload_len();
        let payload = &b[HEADER_LEN..];
        let found = payload.len() / 8;
        if payload.len() % 8 != 0 || found != expected {
            return Err(Error::TruncatedPayload { expected, found });
        }
        let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        Ok(Snapshot { header, values })
    }
}

pub fn write_snapshot(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&snapshot.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Snapshot::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::analytic::sheared_robin;

    fn sample() -> Snapshot {
        let g = ChannelGrid::periodic_2pi(6, 4, 9);
        let u = SpectralField::from_analytic(g, &sheared_robin(1.0, 3, 1, 2, 0.5));
        Snapshot::from_field(&u, 0.25, 1e-3, f64::INFINITY)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.vfld");
        let s = sample();
        write_snapshot(&s, &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.header, s.header);
        assert!(back.values.iter().zip(&s.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(std::fs::read(&path).unwrap().len(), HEADER_LEN + 8 * 3 * 6 * 4 * 9);
    }

    #[test]
    fn bad_magic() {
        let mut b = sample().to_bytes();
        b[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&b), Err(Error::BadMagic(m)) if &m == b"XFLD"));
    }

    #[test]
    fn truncated_payload() {
        let b = sample().to_bytes();
        let n = sample().values.len();
        assert!(matches!(
            Snapshot::from_bytes(&b[..b.len() - 8]),
            Err(Error::TruncatedPayload { expected, found }) if expected == n && found == n - 1
        ));
    }

    #[test]
    fn unsupported_version() {
        let mut b = sample().to_bytes();
        b[4] = 2;
        assert!(matches!(Snapshot::from_bytes(&b), Err(Error::VersionUnsupported(2))));
    }

    #[test]
    fn field_survives_round_trip() {
        let s = sample();
        let u = s.to_field().unwrap();
        let again = Snapshot::from_field(&u, s.header.t, s.header.nu, s.header.zeta);
        let diff = again.values.iter().zip(&s.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-13, "{diff}");
    }
}
