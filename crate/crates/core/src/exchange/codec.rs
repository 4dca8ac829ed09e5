use crate::{Error, Result};

/// Lossless block transform applied to message bodies.
pub trait BlockCodec: Send + Sync {
    fn id(&self) -> u8;
    fn name(&self) -> &'static str;
    fn compress(&self, input: &[u8]) -> Vec<u8>;
    fn decompress(&self, input: &[u8], expected_len: usize) -> Result<Vec<u8>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

impl BlockCodec for Identity {
    fn id(&self) -> u8 {
        0
    }

    fn name(&self) -> &'static str {
        "identity"
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        input.to_vec()
    }

    fn decompress(&self, input: &[u8], expected_len: usize) -> Result<Vec<u8>> {
        if input.len() != expected_len {
            return Err(Error::Codec(format!("identity block has {} bytes, expected {expected_len}", input.len())));
        }
        Ok(input.to_vec())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Lz4;

impl BlockCodec for Lz4 {
    fn id(&self) -> u8 {
        1
    }

    fn name(&self) -> &'static str {
        "lz4"
    }

    fn compress(&self, input: &[u8]) -> Vec<u8> {
        lz4_flex::block::compress(input)
    }

    fn decompress(&self, input: &[u8], expected_len: usize) -> Result<Vec<u8>> {
        let out = lz4_flex::block::decompress(input, expected_len).map_err(|e| Error::Codec(e.to_string()))?;
        if out.len() != expected_len {
            return Err(Error::Codec(format!("lz4 block expanded to {} bytes, expected {expected_len}", out.len())));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CodecKind {
    #[default]
    Identity,
    Lz4,
}

impl CodecKind {
    pub fn codec(self) -> &'static dyn BlockCodec {
        match self {
            CodecKind::Identity => &Identity,
            CodecKind::Lz4 => &Lz4,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(CodecKind::Identity),
            1 => Ok(CodecKind::Lz4),
            _ => Err(Error::Codec(format!("unknown codec id {id}"))),
        }
    }
}

impl std::str::FromStr for CodecKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Ok(CodecKind::Identity),
            "lz4" => Ok(CodecKind::Lz4),
            _ => Err(Error::InvalidParameter(format!("unknown codec `{s}`"))),
        }
    }
}

impl std::fmt::Display for CodecKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.codec().name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let inputs: [&[u8]; 4] = [b"", b"a", &[0u8; 4096], b"abcabcabcabcabcabcxyz"];
        for kind in [CodecKind::Identity, CodecKind::Lz4] {
            let c = kind.codec();
            for input in inputs {
                let z = c.compress(input);
                assert_eq!(c.decompress(&z, input.len()).unwrap(), input);
            }
        }
    }

    #[test]
    fn zeros_shrink_under_lz4() {
        let z = Lz4.compress(&[0u8; 10_000]);
        assert!(z.len() < 100);
    }

    #[test]
    fn length_mismatch_is_error() {
        let z = Lz4.compress(b"hello world hello world");
        assert!(Lz4.decompress(&z, 5).is_err());
        assert!(Identity.decompress(b"abc", 2).is_err());
        assert!(CodecKind::from_id(9).is_err());
    }
}
