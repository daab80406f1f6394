//! Memory allocation between the two passes: the call stack occupies the
//! bottom of memory, directive data follows, then user arrays.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::parser::{DataArg, DataDirective, DirectiveKind, PartialProgram};
use super::{AsmError, Diagnostic, Segment, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum ArrayDataType {
    #[serde(alias = "char", alias = "int8")]
    Byte,
    #[serde(alias = "short", alias = "int16", alias = "hword")]
    Half,
    #[serde(alias = "int", alias = "int32")]
    Word,
}

impl ArrayDataType {
    pub fn size(self) -> u32 {
        match self {
            Self::Byte => 1,
            Self::Half => 2,
            Self::Word => 4,
        }
    }

    fn range(self) -> (i64, i64) {
        match self {
            Self::Byte => (i8::MIN as i64, u8::MAX as i64),
            Self::Half => (i16::MIN as i64, u16::MAX as i64),
            Self::Word => (i32::MIN as i64, u32::MAX as i64),
        }
    }
}

/// An array defined outside the program text (memory editor, `--memory`).
/// Exactly one of `values`, `fill` or `randomSeed` gives its contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UserArray {
    pub name: String,
    pub data_type: ArrayDataType,
    /// Alignment in bytes; defaults to the element size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<i64>>,
    /// Constant every element is set to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_seed: Option<u64>,
    /// Element count for `fill` and `randomSeed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<i64>,
}

impl UserArray {
    pub fn with_values(name: &str, data_type: ArrayDataType, values: Vec<i64>) -> Self {
        Self {
            name: name.to_string(),
            data_type,
            alignment: None,
            values: Some(values),
            fill: None,
            random_seed: None,
            count: None,
            min: None,
            max: None,
        }
    }

    /// Element values, or a message describing why the spec is invalid.
    pub fn elements(&self) -> Result<Vec<i64>, String> {
        let (lo, hi) = self.data_type.range();
        let count = || self.count.ok_or_else(|| format!("array `{}` needs a count", self.name));
        let values = match (&self.values, self.fill, self.random_seed) {
            (Some(v), None, None) => v.clone(),
            (None, Some(fill), None) => vec![fill; count()? as usize],
            (None, None, Some(seed)) => {
                let (min, max) = (self.min.unwrap_or(lo), self.max.unwrap_or(hi));
                if min > max {
                    return Err(format!("array `{}`: min exceeds max", self.name));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count()?).map(|_| rng.gen_range(min..=max)).collect()
            }
            _ => return Err(format!("array `{}` needs exactly one of values, fill or randomSeed", self.name)),
        };
        if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(format!("array `{}`: value {v} does not fit a {:?}", self.name, self.data_type));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct PlacedArray {
    pub name: String,
    pub data_type: ArrayDataType,
    pub address: u32,
    pub length: u32,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub symbols: BTreeMap<String, Symbol>,
    /// First byte after the stack.
    pub data_base: u32,
    /// One past the last allocated byte.
    pub data_end: u32,
    /// Start address of every data item of the partial program.
    pub item_addresses: Vec<u32>,
    pub arrays: Vec<PlacedArray>,
    pub stack_top: u32,
}

fn align_up(value: u64, alignment: u64) -> u64 {
    value.div_ceil(alignment) * alignment
}

pub(crate) fn constant_arg(directive: &DataDirective, index: usize) -> Result<i64, Diagnostic> {
    let err = |msg: String| Diagnostic::new(directive.line, directive.column, msg);
    match directive.args.get(index) {
        Some(DataArg::Expr(e)) => e.eval(&BTreeMap::new(), 0, false).map_err(|e| err(format!("{}: {e}", directive.name))),
        Some(DataArg::Str(_)) => Err(err(format!("{} expects a number", directive.name))),
        None => Err(err(format!("{} is missing an argument", directive.name))),
    }
}

/// Alignment in bytes requested by an alignment directive.
pub(crate) fn alignment_of(directive: &DataDirective) -> Result<u64, Diagnostic> {
    let n = constant_arg(directive, 0)?;
    let err = |msg: &str| Diagnostic::new(directive.line, directive.column, msg);
    if directive.name == ".balign" {
        if n <= 0 || (n as u64).count_ones() != 1 {
            return Err(err(".balign needs a power of two"));
        }
        Ok(n as u64)
    } else {
        if !(0..=16).contains(&n) {
            return Err(err("alignment exponent must be within 0..=16"));
        }
        Ok(1 << n)
    }
}

/// Size in bytes and natural alignment of a byte-emitting directive.
pub(crate) fn footprint(directive: &DataDirective) -> Result<(u64, u64), Diagnostic> {
    let kind = directive.kind;
    Ok(match kind {
        DirectiveKind::Byte | DirectiveKind::Hword | DirectiveKind::Word => {
            let size = kind.element_size() as u64;
            (size * directive.args.len() as u64, size)
        }
        DirectiveKind::Ascii | DirectiveKind::Asciiz | DirectiveKind::String => {
            let terminator = u64::from(kind != DirectiveKind::Ascii);
            let total = directive
                .args
                .iter()
                .map(|a| match a {
                    DataArg::Str(s) => s.len() as u64 + terminator,
                    DataArg::Expr(_) => 0,
                })
                .sum();
            (total, 1)
        }
        DirectiveKind::Skip | DirectiveKind::Zero => {
            let n = constant_arg(directive, 0)?;
            if !(0..=u32::MAX as i64).contains(&n) {
                return Err(Diagnostic::new(directive.line, directive.column, format!("{}: invalid size {n}", directive.name)));
            }
            (n as u64, 1)
        }
        DirectiveKind::Align => (0, alignment_of(directive)?),
    })
}

/// Assigns addresses to every data label and user array.
pub fn layout_memory(
    partial: &PartialProgram,
    arrays: &[UserArray],
    stack_size: u32,
    capacity: u32,
) -> Result<Layout, AsmError> {
    let mut errors = Vec::new();
    let mut symbols: BTreeMap<String, Symbol> = partial
        .code_labels
        .iter()
        .map(|(name, &value)| (name.clone(), Symbol { segment: Segment::Code, value }))
        .collect();
    let mut address = stack_size as u64;
    let mut item_addresses = Vec::with_capacity(partial.data.len());
    for item in &partial.data {
        if let Some(directive) = &item.directive {
            match footprint(directive) {
                Ok((size, alignment)) => {
                    address = align_up(address, alignment);
                    item_addresses.push(address as u32);
                    for label in &item.labels {
                        symbols.insert(label.clone(), Symbol { segment: Segment::Data, value: address as u32 });
                    }
                    address += size;
                }
                Err(e) => {
                    errors.push(e);
                    item_addresses.push(address as u32);
                }
            }
        } else {
            item_addresses.push(address as u32);
            for label in &item.labels {
                symbols.insert(label.clone(), Symbol { segment: Segment::Data, value: address as u32 });
            }
        }
        address = address.min(u64::from(u32::MAX));
    }

    let mut placed = Vec::with_capacity(arrays.len());
    for array in arrays {
        let values = match array.elements() {
            Ok(v) => v,
            Err(msg) => {
                errors.push(Diagnostic::new(0, 0, msg));
                continue;
            }
        };
        let alignment = array.alignment.unwrap_or(array.data_type.size()).max(1);
        if alignment.count_ones() != 1 {
            errors.push(Diagnostic::new(0, 0, format!("array `{}`: alignment must be a power of two", array.name)));
            continue;
        }
        if symbols.contains_key(&array.name) {
            errors.push(Diagnostic::new(0, 0, format!("array `{}` clashes with a program label", array.name)));
            continue;
        }
        address = align_up(address, alignment as u64);
        let size = array.data_type.size() as usize;
        let bytes: Vec<u8> = values.iter().flat_map(|v| (*v as u32).to_le_bytes()[..size].to_vec()).collect();
        symbols.insert(array.name.clone(), Symbol { segment: Segment::Data, value: address as u32 });
        placed.push(PlacedArray {
            name: array.name.clone(),
            data_type: array.data_type,
            address: address as u32,
            length: values.len() as u32,
            bytes: bytes.clone(),
        });
        address += bytes.len() as u64;
    }

    if address > capacity as u64 {
        errors.push(Diagnostic::new(
            0,
            0,
            format!("program needs {address} bytes of memory but the capacity is {capacity}"),
        ));
    }
    if !errors.is_empty() {
        return Err(AsmError { diagnostics: errors });
    }
    Ok(Layout {
        symbols,
        data_base: stack_size,
        data_end: address as u32,
        item_addresses,
        arrays: placed,
        stack_top: stack_size,
    })
}
