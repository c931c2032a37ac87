// SPDX-License-Identifier: Apache-2.0

//! Packed memory layout. Records place fields in declaration order with no
//! padding; an optional wrapper is laid out exactly like its payload.

use super::types::{IrType, RecordTable, ADDRESS_BYTES, SLICE_BYTES, VECTOR_BYTES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    pub offset: u64,
    pub ty: IrType,
    /// Access path relative to the laid-out object, e.g. `.next` or `[3].len`.
    pub path: String,
}

/// Byte size of `ty`. `i1` occupies one byte in memory.
pub fn size_of(ty: &IrType, records: &RecordTable) -> u64 {
    match ty {
        IrType::Int(w) => u64::from((*w).div_ceil(8)),
        IrType::Address(_) => ADDRESS_BYTES,
        IrType::Record(name) => records
            .get(name)
            .map(|r| r.fields.iter().map(|(_, t)| size_of(t, records)).sum())
            .unwrap_or(0),
        IrType::Array(elem, n) => size_of(elem, records) * n,
        IrType::StrSlice => SLICE_BYTES,
        IrType::ByteVec => VECTOR_BYTES,
        IrType::Optional(inner) => size_of(inner, records),
        IrType::Unit => 0,
    }
}

/// Flattens `ty` into its leaf fields with packed byte offsets.
pub fn layout_of(ty: &IrType, records: &RecordTable) -> Vec<LayoutEntry> {
    let mut out = Vec::new();
    flatten(ty, records, 0, String::new(), &mut out);
    out
}

fn flatten(
    ty: &IrType,
    records: &RecordTable,
    base: u64,
    path: String,
    out: &mut Vec<LayoutEntry>,
) {
    match ty {
        IrType::Int(_) | IrType::Address(_) => out.push(LayoutEntry {
            offset: base,
            ty: ty.clone(),
            path,
        }),
        IrType::Optional(inner) => flatten(inner, records, base, path, out),
        IrType::Record(name) => {
            let Some(def) = records.get(name) else { return };
            let mut offset = base;
            for (field, fty) in &def.fields {
                flatten(fty, records, offset, format!("{path}.{field}"), out);
                offset += size_of(fty, records);
            }
        }
        IrType::Array(elem, n) => {
            let stride = size_of(elem, records);
            for i in 0..*n {
                flatten(
                    elem,
                    records,
                    base + i * stride,
                    format!("{path}[{i}]"),
                    out,
                );
            }
        }
        IrType::StrSlice | IrType::ByteVec => {
            let data = IrType::ptr(IrType::Int(8));
            out.push(LayoutEntry {
                offset: base,
                ty: data,
                path: format!("{path}.data"),
            });
            out.push(LayoutEntry {
                offset: base + 8,
                ty: IrType::Int(64),
                path: format!("{path}.len"),
            });
            if matches!(ty, IrType::ByteVec) {
                out.push(LayoutEntry {
                    offset: base + 16,
                    ty: IrType::Int(64),
                    path: format!("{path}.cap"),
                });
            }
        }
        IrType::Unit => {}
    }
}

/// Byte offset of a named field within a slice/vector header or record.
pub fn field_offset(ty: &IrType, field: &str, records: &RecordTable) -> Option<(u64, IrType)> {
    match ty {
        IrType::StrSlice | IrType::ByteVec => match field {
            "data" => Some((0, IrType::ptr(IrType::Int(8)))),
            "len" => Some((8, IrType::Int(64))),
            "cap" if matches!(ty, IrType::ByteVec) => Some((16, IrType::Int(64))),
            _ => None,
        },
        IrType::Record(name) => {
            let def = records.get(name)?;
            let mut offset = 0;
            for (fname, fty) in &def.fields {
                if fname == field {
                    return Some((offset, fty.clone()));
                }
                offset += size_of(fty, records);
            }
            None
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mir::types::RecordDef;

    fn table(defs: &[(&str, &[(&str, IrType)])]) -> RecordTable {
        defs.iter()
            .map(|(n, fields)| {
                (
                    n.to_string(),
                    RecordDef {
                        name: n.to_string(),
                        fields: fields
                            .iter()
                            .map(|(f, t)| (f.to_string(), t.clone()))
                            .collect(),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn scalar_layout() {
        let rt = RecordTable::new();
        assert_eq!(
            layout_of(&IrType::Int(32), &rt),
            vec![LayoutEntry {
                offset: 0,
                ty: IrType::Int(32),
                path: String::new()
            }]
        );
    }

    #[test]
    fn packed_record_has_no_padding() {
        let rt = table(&[("S", &[("a", IrType::Int(8)), ("b", IrType::Int(32))])]);
        let l = layout_of(&IrType::Record("S".into()), &rt);
        assert_eq!(
            l,
            vec![
                LayoutEntry {
                    offset: 0,
                    ty: IrType::Int(8),
                    path: ".a".into()
                },
                LayoutEntry {
                    offset: 1,
                    ty: IrType::Int(32),
                    path: ".b".into()
                },
            ]
        );
        assert_eq!(size_of(&IrType::Record("S".into()), &rt), 5);
    }

    #[test]
    fn optional_is_transparent() {
        let rt = RecordTable::new();
        let p = IrType::ptr(IrType::Int(8));
        assert_eq!(layout_of(&IrType::opt(p.clone()), &rt), layout_of(&p, &rt));
        assert_eq!(size_of(&IrType::opt(IrType::ByteVec), &rt), 24);
    }

    #[test]
    fn slice_and_vector_headers() {
        let rt = RecordTable::new();
        let s = layout_of(&IrType::StrSlice, &rt);
        assert_eq!(s.iter().map(|e| e.offset).collect::<Vec<_>>(), vec![0, 8]);
        let v = layout_of(&IrType::ByteVec, &rt);
        assert_eq!(
            v.iter().map(|e| e.path.as_str()).collect::<Vec<_>>(),
            vec![".data", ".len", ".cap"]
        );
    }

    #[test]
    fn nested_arrays_and_records() {
        let rt = table(&[
            (
                "In",
                &[("x", IrType::Int(16)), ("p", IrType::ptr(IrType::Int(8)))],
            ),
            (
                "Out",
                &[
                    (
                        "arr",
                        IrType::Array(Box::new(IrType::Record("In".into())), 2),
                    ),
                    ("z", IrType::Int(8)),
                ],
            ),
        ]);
        let l = layout_of(&IrType::Record("Out".into()), &rt);
        let offsets: Vec<_> = l.iter().map(|e| (e.offset, e.path.as_str())).collect();
        assert_eq!(
            offsets,
            vec![
                (0, ".arr[0].x"),
                (2, ".arr[0].p"),
                (10, ".arr[1].x"),
                (12, ".arr[1].p"),
                (20, ".z")
            ]
        );
    }
}
