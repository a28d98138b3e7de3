//! PLY import/export for the community 3DGS checkpoint layout.
//!
//! Writing always emits binary little-endian; reading accepts binary
//! little-endian or ASCII. Required vertex properties: `x y z`,
//! `rot_0..rot_3`, `scale_0..scale_2`, `opacity`, `f_dc_0..f_dc_2`.
//! Optional: `f_rest_0..f_rest_{3M-1}` (channel-major, as written by 3DGS)
//! and `features_0..features_{F-1}`. Unknown properties are skipped.

use crate::error::{Error, Result};
use crate::splat::{sh_degree_from_coeff_count, GaussianCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl ScalarType {
    fn parse(s: &str) -> Option<ScalarType> {
        match s {
            "float" | "float32" => Some(ScalarType::F32),
            "double" | "float64" => Some(ScalarType::F64),
            "char" | "int8" => Some(ScalarType::I8),
            "uchar" | "uint8" => Some(ScalarType::U8),
            "short" | "int16" => Some(ScalarType::I16),
            "ushort" | "uint16" => Some(ScalarType::U16),
            "int" | "int32" => Some(ScalarType::I32),
            "uint" | "uint32" => Some(ScalarType::U32),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::F32 | ScalarType::I32 | ScalarType::U32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
}

struct Header {
    ascii: bool,
    vertex_count: usize,
    properties: Vec<Property>,
    /// Byte offset where the payload starts.
    payload_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let err = |offset: usize, message: &str| Error::PlyParse {
        offset,
        message: message.to_string(),
    };
    // Header is ASCII lines terminated by '\n' up to "end_header".
    let mut pos = 0usize;
    let mut lines = Vec::new();
    loop {
        let start = pos;
        let rel = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(pos, "header not terminated by end_header"))?;
        pos += rel + 1;
        let line = std::str::from_utf8(&bytes[start..start + rel])
            .map_err(|_| err(start, "header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .to_string();
        let is_end = line == "end_header";
        lines.push((start, line));
        if is_end {
            break;
        }
        if pos >= bytes.len() {
            return Err(err(pos, "header not terminated by end_header"));
        }
    }
    if lines.is_empty() || lines[0].1 != "ply" {
        return Err(err(0, "missing `ply` magic line"));
    }
    let mut ascii = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex_element = false;
    for (offset, line) in &lines[1..] {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            Some("format") => match tokens.get(1).copied() {
                Some("ascii") => ascii = Some(true),
                Some("binary_little_endian") => ascii = Some(false),
                Some(other) => {
                    return Err(err(*offset, &format!("unsupported format `{other}`")))
                }
                None => return Err(err(*offset, "format line missing type")),
            },
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tokens.get(1).copied().unwrap_or("");
                if name == "vertex" {
                    let n: usize = tokens
                        .get(2)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(*offset, "bad vertex count"))?;
                    vertex_count = Some(n);
                    in_vertex_element = true;
                } else {
                    if vertex_count.is_none() {
                        return Err(err(*offset, "first element must be vertex"));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                if tokens.get(1) == Some(&"list") {
                    return Err(err(*offset, "list properties unsupported on vertex"));
                }
                let ty = tokens
                    .get(1)
                    .and_then(|t| ScalarType::parse(t))
                    .ok_or_else(|| err(*offset, "unknown property type"))?;
                let name = tokens
                    .get(2)
                    .ok_or_else(|| err(*offset, "property missing name"))?;
                properties.push(Property {
                    name: name.to_string(),
                    ty,
                });
            }
            Some("end_header") => {}
            Some(other) => return Err(err(*offset, &format!("unknown keyword `{other}`"))),
            None => {}
        }
    }
    let ascii = ascii.ok_or_else(|| err(0, "missing format line"))?;
    let vertex_count = vertex_count.ok_or_else(|| err(0, "missing vertex element"))?;
    Ok(Header {
        ascii,
        vertex_count,
        properties,
        payload_offset: pos,
    })
}

/// Parse a 3DGS PLY byte buffer into a cloud.
pub fn load_ply(bytes: &[u8]) -> Result<GaussianCloud> {
    let header = parse_header(bytes)?;
    if header.vertex_count == 0 {
        return Err(Error::PlyParse {
            offset: header.payload_offset,
            message: "vertex count is zero".into(),
        });
    }
    let n = header.vertex_count;
    let prop_index = |name: &str| -> Result<usize> {
        header
            .properties
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::PlyMissingProperty(name.to_string()))
    };
    let required = [
        "x", "y", "z", "rot_0", "rot_1", "rot_2", "rot_3", "scale_0", "scale_1", "scale_2",
        "opacity", "f_dc_0", "f_dc_1", "f_dc_2",
    ];
    for name in required {
        let idx = prop_index(name)?;
        if header.properties[idx].ty != ScalarType::F32 {
            return Err(Error::PlyParse {
                offset: 0,
                message: format!("property `{name}` must be float"),
            });
        }
    }
    let n_rest = header
        .properties
        .iter()
        .filter(|p| p.name.starts_with("f_rest_"))
        .count();
    if n_rest % 3 != 0 {
        return Err(Error::PlyParse {
            offset: 0,
            message: format!("f_rest count {n_rest} is not a multiple of 3"),
        });
    }
    let m = n_rest / 3;
    let sh_degree = sh_degree_from_coeff_count(m).ok_or_else(|| Error::PlyParse {
        offset: 0,
        message: format!("f_rest count {n_rest} matches no SH degree <= 3"),
    })?;
    let n_feat = header
        .properties
        .iter()
        .filter(|p| p.name.starts_with("features_"))
        .count();

    // Read the full property table, then gather into attribute arrays.
    let n_props = header.properties.len();
    let table = if header.ascii {
        read_ascii_table(bytes, &header)?
    } else {
        read_binary_table(bytes, &header)?
    };
    debug_assert_eq!(table.len(), n * n_props);

    let col = |name: &str| prop_index(name).map(|idx| idx);
    let gather3 = |a: &str, b: &str, c: &str| -> Result<Vec<[f32; 3]>> {
        let (ia, ib, ic) = (col(a)?, col(b)?, col(c)?);
        Ok((0..n)
            .map(|i| {
                [
                    table[i * n_props + ia],
                    table[i * n_props + ib],
                    table[i * n_props + ic],
                ]
            })
            .collect())
    };
    let means = gather3("x", "y", "z")?;
    let log_scales = gather3("scale_0", "scale_1", "scale_2")?;
    let sh0 = gather3("f_dc_0", "f_dc_1", "f_dc_2")?;
    let (i0, i1, i2, i3) = (col("rot_0")?, col("rot_1")?, col("rot_2")?, col("rot_3")?);
    let rotations: Vec<[f32; 4]> = (0..n)
        .map(|i| {
            [
                table[i * n_props + i0],
                table[i * n_props + i1],
                table[i * n_props + i2],
                table[i * n_props + i3],
            ]
        })
        .collect();
    let iop = col("opacity")?;
    let opacity_logits: Vec<f32> = (0..n).map(|i| table[i * n_props + iop]).collect();

    // f_rest is channel-major on disk: f_rest_{c*M + m} -> (m, c).
    let mut sh_n = vec![0.0f32; n * m * 3];
    if m > 0 {
        let rest_cols: Vec<usize> = (0..3 * m)
            .map(|j| prop_index(&format!("f_rest_{j}")))
            .collect::<Result<_>>()?;
        for i in 0..n {
            for c in 0..3 {
                for mm in 0..m {
                    sh_n[(i * m + mm) * 3 + c] = table[i * n_props + rest_cols[c * m + mm]];
                }
            }
        }
    }
    let features = if n_feat > 0 {
        let feat_cols: Vec<usize> = (0..n_feat)
            .map(|j| prop_index(&format!("features_{j}")))
            .collect::<Result<_>>()?;
        let mut feats = vec![0.0f32; n * n_feat];
        for i in 0..n {
            for (j, &cidx) in feat_cols.iter().enumerate() {
                feats[i * n_feat + j] = table[i * n_props + cidx];
            }
        }
        Some(feats)
    } else {
        None
    };

    Ok(GaussianCloud {
        means,
        rotations,
        log_scales,
        opacity_logits,
        sh0,
        sh_n,
        sh_degree,
        features,
        feature_dim: n_feat,
        flags: None,
    })
}

fn read_binary_table(bytes: &[u8], header: &Header) -> Result<Vec<f32>> {
    let row_size: usize = header.properties.iter().map(|p| p.ty.size()).sum();
    let needed = header.vertex_count * row_size;
    let payload = &bytes[header.payload_offset.min(bytes.len())..];
    if payload.len() < needed {
        return Err(Error::PlyParse {
            offset: header.payload_offset + payload.len(),
            message: format!(
                "truncated payload: need {needed} bytes, have {}",
                payload.len()
            ),
        });
    }
    let n_props = header.properties.len();
    let mut table = vec![0.0f32; header.vertex_count * n_props];
    for i in 0..header.vertex_count {
        let mut off = i * row_size;
        for (j, p) in header.properties.iter().enumerate() {
            let v = match p.ty {
                ScalarType::F32 => f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()),
                ScalarType::F64 => {
                    f64::from_le_bytes(payload[off..off + 8].try_into().unwrap()) as f32
                }
                ScalarType::I8 => payload[off] as i8 as f32,
                ScalarType::U8 => payload[off] as f32,
                ScalarType::I16 => {
                    i16::from_le_bytes(payload[off..off + 2].try_into().unwrap()) as f32
                }
                ScalarType::U16 => {
                    u16::from_le_bytes(payload[off..off + 2].try_into().unwrap()) as f32
                }
                ScalarType::I32 => {
                    i32::from_le_bytes(payload[off..off + 4].try_into().unwrap()) as f32
                }
                ScalarType::U32 => {
                    u32::from_le_bytes(payload[off..off + 4].try_into().unwrap()) as f32
                }
            };
            table[i * n_props + j] = v;
            off += p.ty.size();
        }
    }
    Ok(table)
}

fn read_ascii_table(bytes: &[u8], header: &Header) -> Result<Vec<f32>> {
    let text = std::str::from_utf8(&bytes[header.payload_offset..]).map_err(|_| Error::PlyParse {
        offset: header.payload_offset,
        message: "ASCII payload is not valid UTF-8".into(),
    })?;
    let n_props = header.properties.len();
    let mut table = Vec::with_capacity(header.vertex_count * n_props);
    for tok in text.split_whitespace() {
        if table.len() == header.vertex_count * n_props {
            break;
        }
        let v: f32 = tok.parse().map_err(|_| Error::PlyParse {
            offset: header.payload_offset,
            message: format!("bad numeric token `{tok}`"),
        })?;
        table.push(v);
    }
    if table.len() < header.vertex_count * n_props {
        return Err(Error::PlyParse {
            offset: bytes.len(),
            message: format!(
                "truncated payload: need {} values, have {}",
                header.vertex_count * n_props,
                table.len()
            ),
        });
    }
    Ok(table)
}

/// Serialize a cloud as binary little-endian PLY.
pub fn save_ply(cloud: &GaussianCloud) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len();
    let m = cloud.sh_coeffs();
    let f = cloud.feature_dim;
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {n}\n"));
    for name in ["x", "y", "z"] {
        header.push_str(&format!("property float {name}\n"));
    }
    for k in 0..4 {
        header.push_str(&format!("property float rot_{k}\n"));
    }
    for k in 0..3 {
        header.push_str(&format!("property float scale_{k}\n"));
    }
    header.push_str("property float opacity\n");
    for k in 0..3 {
        header.push_str(&format!("property float f_dc_{k}\n"));
    }
    for k in 0..3 * m {
        header.push_str(&format!("property float f_rest_{k}\n"));
    }
    for k in 0..f {
        header.push_str(&format!("property float features_{k}\n"));
    }
    header.push_str("end_header\n");

    let row_floats = 3 + 4 + 3 + 1 + 3 + 3 * m + f;
    let mut out = Vec::with_capacity(header.len() + n * row_floats * 4);
    out.extend_from_slice(header.as_bytes());
    let push = |v: f32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    for i in 0..n {
        for &v in &cloud.means[i] {
            push(v, &mut out);
        }
        for &v in &cloud.rotations[i] {
            push(v, &mut out);
        }
        for &v in &cloud.log_scales[i] {
            push(v, &mut out);
        }
        push(cloud.opacity_logits[i], &mut out);
        for &v in &cloud.sh0[i] {
            push(v, &mut out);
        }
        // Channel-major f_rest, matching the 3DGS on-disk layout.
        for c in 0..3 {
            for mm in 0..m {
                push(cloud.sh_n_at(i, mm, c), &mut out);
            }
        }
        if let Some(feat) = &cloud.features {
            for &v in &feat[i * f..(i + 1) * f] {
                push(v, &mut out);
            }
        }
    }
    Ok(out)
}
