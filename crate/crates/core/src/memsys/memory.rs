use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::asm::program::base64_bytes;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize, JsonSchema)]
pub enum MemoryError {
    #[error("access of {size} bytes at {address:#x} is outside memory of {capacity} bytes")]
    OutOfBounds { address: u64, size: u64, capacity: u64 },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("image of {size} bytes does not fit memory of {capacity} bytes")]
    TooLarge { size: usize, capacity: usize },
}

/// Flat byte-addressed main memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainMemory {
    #[serde(with = "base64_bytes")]
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum DumpFormat {
    Binary,
    Csv,
}

impl MainMemory {
    pub fn new(capacity: usize) -> Self {
        Self { bytes: vec![0; capacity] }
    }

    pub fn capacity(&self) -> usize {
        self.bytes.len()
    }

    fn range(&self, address: u64, size: u64) -> Result<std::ops::Range<usize>, MemoryError> {
        let end = address.checked_add(size).filter(|&e| e <= self.bytes.len() as u64);
        match end {
            Some(end) => Ok(address as usize..end as usize),
            None => Err(MemoryError::OutOfBounds { address, size, capacity: self.bytes.len() as u64 }),
        }
    }

    pub fn check(&self, address: u64, size: u64) -> Result<(), MemoryError> {
        self.range(address, size).map(|_| ())
    }

    pub fn read(&self, address: u64, size: u64) -> Result<&[u8], MemoryError> {
        Ok(&self.bytes[self.range(address, size)?])
    }

    pub fn write(&mut self, address: u64, data: &[u8]) -> Result<(), MemoryError> {
        let range = self.range(address, data.len() as u64)?;
        self.bytes[range].copy_from_slice(data);
        Ok(())
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Replaces the contents with an image starting at address 0; the rest is zeroed.
    pub fn load_image(&mut self, image: &[u8]) -> Result<(), MemoryError> {
        if image.len() > self.bytes.len() {
            return Err(MemoryError::TooLarge { size: image.len(), capacity: self.bytes.len() });
        }
        self.bytes.fill(0);
        self.bytes[..image.len()].copy_from_slice(image);
        Ok(())
    }
}

/// Parses `address,byte` rows (decimal); unlisted bytes are zero.
/// Blank lines and a leading `address,byte` header are skipped.
pub fn parse_csv(text: &str, capacity: usize) -> Result<Vec<u8>, MemoryError> {
    let mut image = vec![0u8; capacity];
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || (row == 1 && line.eq_ignore_ascii_case("address,byte")) {
            continue;
        }
        let err = |message: String| MemoryError::Csv { row, message };
        let (address, value) = line.split_once(',').ok_or_else(|| err(format!("expected `address,byte`, got `{line}`")))?;
        let address: usize = address.trim().parse().map_err(|_| err(format!("bad address `{}`", address.trim())))?;
        let value: u8 = value.trim().parse().map_err(|_| err(format!("bad byte `{}`", value.trim())))?;
        if address >= capacity {
            return Err(err(format!("address {address} is outside memory of {capacity} bytes")));
        }
        image[address] = value;
    }
    Ok(image)
}

/// One row per nonzero byte.
pub fn to_csv(bytes: &[u8]) -> String {
    let mut out = String::from("address,byte\n");
    for (address, byte) in bytes.iter().enumerate().filter(|(_, b)| **b != 0) {
        out.push_str(&format!("{address},{byte}\n"));
    }
    out
}

/// Decodes an import payload in either format.
pub fn import_image(format: DumpFormat, payload: &[u8], capacity: usize) -> Result<Vec<u8>, MemoryError> {
    match format {
        DumpFormat::Binary => {
            if payload.len() > capacity {
                return Err(MemoryError::TooLarge { size: payload.len(), capacity });
            }
            Ok(payload.to_vec())
        }
        DumpFormat::Csv => {
            let text = String::from_utf8_lossy(payload);
            parse_csv(&text, capacity)
        }
    }
}

pub fn export_image(format: DumpFormat, bytes: &[u8]) -> Vec<u8> {
    match format {
        DumpFormat::Binary => bytes.to_vec(),
        DumpFormat::Csv => to_csv(bytes).into_bytes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        let mut m = MainMemory::new(16);
        m.write(12, &[1, 2, 3, 4]).unwrap();
        assert_eq!(m.read(12, 4).unwrap(), [1, 2, 3, 4]);
        assert!(m.read(16, 1).is_err());
        assert!(m.write(13, &[0; 4]).is_err());
        assert!(m.read(u64::MAX, 2).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let mut bytes = vec![0u8; 8];
        bytes[0] = 5;
        bytes[7] = 255;
        let csv = to_csv(&bytes);
        assert!(csv.lines().any(|l| l == "0,5"));
        assert_eq!(parse_csv(&csv, 8).unwrap(), bytes);
        assert_eq!(parse_csv("0,1\nxyz,5\n", 8), Err(MemoryError::Csv { row: 2, message: "bad address `xyz`".into() }));
        assert!(parse_csv("9,1", 8).is_err());
        assert!(parse_csv("1,256", 8).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let image: Vec<u8> = (0..32).collect();
        let imported = import_image(DumpFormat::Binary, &image, 64).unwrap();
        let mut m = MainMemory::new(64);
        m.load_image(&imported).unwrap();
        assert_eq!(&export_image(DumpFormat::Binary, m.bytes())[..32], &image[..]);
        assert!(import_image(DumpFormat::Binary, &image, 16).is_err());
    }
}
