//! Versioned checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "NJDC"
//! version u32
//! epoch   u32
//! metric  f64      selection-metric value of this snapshot
//! config  u32 len + UTF-8 canonical config text
//! count   u32      number of sections
//! per section:  u32 name len + name, u32 blob count
//! per blob:     u32 name len + name, u64 element count + f32 data
//! ```
//!
//! Sections group the parameter blobs of one network or optimizer. Blob
//! order within a section is fixed by the producing network (documented at
//! each `blobs()` implementation) and is part of the format.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;

pub const MAGIC: [u8; 4] = *b"NJDC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub name: String,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub blobs: Vec<Blob>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section { name: name.into(), blobs: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, data: Vec<f32>) {
        self.blobs.push(Blob { name: name.into(), data });
    }

    pub fn blob(&self, name: &str) -> Result<&Blob, Error> {
        self.blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or(Error::CheckpointCorrupt("missing blob"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u32,
    pub selection_metric: f64,
    pub config_text: String,
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn new(config_text: String) -> Self {
        Checkpoint { epoch: 0, selection_metric: f64::NAN, config_text, sections: Vec::new() }
    }

    pub fn section(&self, name: &str) -> Result<&Section, Error> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or(Error::CheckpointCorrupt("missing section"))
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s.name == name)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.selection_metric.to_le_bytes());
        write_str(&mut out, &self.config_text);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for section in &self.sections {
            write_str(&mut out, &section.name);
            out.extend_from_slice(&(section.blobs.len() as u32).to_le_bytes());
            for blob in &section.blobs {
                write_str(&mut out, &blob.name);
                out.extend_from_slice(&(blob.data.len() as u64).to_le_bytes());
                for v in &blob.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::CheckpointCorrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::CheckpointVersion { found: version, supported: VERSION });
        }
        let epoch = r.u32()?;
        let selection_metric = r.f64()?;
        let config_text = r.string()?;
        let n_sections = r.u32()? as usize;
        let mut sections = Vec::with_capacity(n_sections.min(1024));
        for _ in 0..n_sections {
            let name = r.string()?;
            let n_blobs = r.u32()? as usize;
            let mut blobs = Vec::with_capacity(n_blobs.min(4096));
            for _ in 0..n_blobs {
                let bname = r.string()?;
                let count = r.u64()? as usize;
                let raw = r.take(count.checked_mul(4).ok_or(Error::CheckpointCorrupt("overflow"))?)?;
                let mut data = Vec::with_capacity(count);
                for chunk in raw.chunks_exact(4) {
                    data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
                }
                blobs.push(Blob { name: bname, data });
            }
            sections.push(Section { name, blobs });
        }
        if r.pos != bytes.len() {
            return Err(Error::CheckpointCorrupt("trailing bytes"));
        }
        Ok(Checkpoint { epoch, selection_metric, config_text, sections })
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        let end = self.pos.checked_add(n).ok_or(Error::CheckpointCorrupt("overflow"))?;
        if end > self.bytes.len() {
            return Err(Error::CheckpointCorrupt("truncated"));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, Error> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, Error> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, Error> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        core::str::from_utf8(raw)
            .map(String::from)
            .map_err(|_| Error::CheckpointCorrupt("invalid utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample() -> Checkpoint {
        let mut ckpt = Checkpoint::new(String::from("seed = 7\n"));
        ckpt.epoch = 3;
        ckpt.selection_metric = 0.25;
        let mut s = Section::new("theta");
        s.push("sub0.w", vec![1.0, -2.5, 3.25]);
        s.push("sub0.b", vec![0.0; 4]);
        ckpt.sections.push(s);
        ckpt
    }

    #[test]
    fn round_trip_is_identity() {
        let ckpt = sample();
        let bytes = ckpt.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(ckpt, back);
        // bit-exact on the payload too
        assert_eq!(bytes, back.encode());
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut bytes = sample().encode();
        bytes[4] = bytes[4].wrapping_add(1);
        match Checkpoint::decode(&bytes) {
            Err(Error::CheckpointVersion { found, supported }) => {
                assert_eq!(found, VERSION + 1);
                assert_eq!(supported, VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = sample().encode();
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(Checkpoint::decode(truncated), Err(Error::CheckpointCorrupt(_))));
    }

    #[test]
    fn every_prefix_truncation_is_detected() {
        let bytes = sample().encode();
        for cut in 0..bytes.len() {
            let res = Checkpoint::decode(&bytes[..cut]);
            assert!(res.is_err(), "prefix of {cut} bytes decoded successfully");
        }
    }
}
