//! Chart measurements on disk, gray-chart shading removal and ΔE reporting.
//!
//! Patch CSV layout: `patch_id,R,G,B[,X,Y,Z][,grayR,grayG,grayB]`, plus any
//! number of corrected triples `X_<method>,Y_<method>,Z_<method>` appended by
//! the `apply` command. Lines starting with `#` are comments.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::Matrix3;

use crate::colorimetry::{delta_e_xyz, ColorSpace, ColorTriple, WhitePoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub patch_id: String,
    /// Linear camera RGB.
    pub rgb: ColorTriple,
    /// Measured reference XYZ.
    pub xyz: Option<ColorTriple>,
    /// Same-position capture of a uniform gray card.
    pub gray_rgb: Option<ColorTriple>,
    /// Corrected XYZ per method tag, in column order.
    pub corrected: Vec<(String, ColorTriple)>,
}

const RGB_COLS: [&str; 3] = ["R", "G", "B"];
const XYZ_COLS: [&str; 3] = ["X", "Y", "Z"];
const GRAY_COLS: [&str; 3] = ["grayR", "grayG", "grayB"];

fn corrected_cols(tag: &str) -> [String; 3] {
    [format!("X_{tag}"), format!("Y_{tag}"), format!("Z_{tag}")]
}

struct Layout {
    id: usize,
    rgb: [usize; 3],
    xyz: Option<[usize; 3]>,
    gray: Option<[usize; 3]>,
    corrected: Vec<(String, [usize; 3])>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn triple_columns<S: AsRef<str>>(headers: &csv::StringRecord, names: &[S; 3]) -> Result<Option<[usize; 3]>> {
    let found = names.each_ref().map(|n| column(headers, n.as_ref()));
    match found {
        [Some(a), Some(b), Some(c)] => Ok(Some([a, b, c])),
        [None, None, None] => Ok(None),
        _ => {
            let missing = names
                .iter()
                .zip(found)
                .find(|(_, f)| f.is_none())
                .map(|(n, _)| n.as_ref().to_string())
                .unwrap_or_default();
            Err(Error::MissingColumn(missing))
        }
    }
}

impl Layout {
    fn from_headers(headers: &csv::StringRecord) -> Result<Self> {
        let id = column(headers, "patch_id").ok_or_else(|| Error::MissingColumn("patch_id".into()))?;
        let rgb = triple_columns(headers, &RGB_COLS)?.ok_or_else(|| Error::MissingColumn("R".into()))?;
        let xyz = triple_columns(headers, &XYZ_COLS)?;
        let gray = triple_columns(headers, &GRAY_COLS)?;
        let mut corrected = Vec::new();
        for h in headers.iter() {
            if let Some(tag) = h.strip_prefix("X_") {
                let cols = triple_columns(headers, &corrected_cols(tag))?.expect("X_ column present");
                corrected.push((tag.to_string(), cols));
            }
        }
        Ok(Self {
            id,
            rgb,
            xyz,
            gray,
            corrected,
        })
    }
}

fn parse_triple(record: &csv::StringRecord, cols: [usize; 3], line: u64) -> Result<ColorTriple> {
    let mut out = [0.0; 3];
    for (slot, col) in out.iter_mut().zip(cols) {
        let field = record.get(col).unwrap_or("");
        *slot = field.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("`{field}` is not a number"),
        })?;
        if !slot.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("`{field}` is not finite"),
            });
        }
    }
    Ok(ColorTriple(out))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads patch records; row order is preserved.
pub fn load_patches<R: Read>(source: R) -> Result<Vec<PatchRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let layout = Layout::from_headers(&headers)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rgb = parse_triple(&row, layout.rgb, line)?;
        let xyz = layout.xyz.map(|c| parse_triple(&row, c, line)).transpose()?;
        let gray_rgb = layout.gray.map(|c| parse_triple(&row, c, line)).transpose()?;
        let corrected = layout
            .corrected
            .iter()
            .map(|(tag, c)| Ok((tag.clone(), parse_triple(&row, *c, line)?)))
            .collect::<Result<Vec<_>>>()?;
        records.push(PatchRecord {
            patch_id: row.get(layout.id).unwrap_or("").to_string(),
            rgb,
            xyz,
            gray_rgb,
            corrected,
        });
    }
    Ok(records)
}

/// Writes records with the column set of the first record; every record
/// must carry the same optional columns.
pub fn write_patches<W: Write>(sink: W, records: &[PatchRecord]) -> Result<()> {
    let first = records.first();
    let has_xyz = first.is_some_and(|r| r.xyz.is_some());
    let has_gray = first.is_some_and(|r| r.gray_rgb.is_some());
    let tags: Vec<String> = first
        .map(|r| r.corrected.iter().map(|(t, _)| t.clone()).collect())
        .unwrap_or_default();

    let mut header: Vec<String> = vec!["patch_id".into()];
    header.extend(RGB_COLS.iter().map(|s| s.to_string()));
    if has_xyz {
        header.extend(XYZ_COLS.iter().map(|s| s.to_string()));
    }
    if has_gray {
        header.extend(GRAY_COLS.iter().map(|s| s.to_string()));
    }
    for tag in &tags {
        header.extend(corrected_cols(tag));
    }

    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(&header).map_err(csv_error)?;
    for r in records {
        let same_tags = r.corrected.len() == tags.len()
            && r.corrected.iter().zip(&tags).all(|((t, _), u)| t == u);
        if r.xyz.is_some() != has_xyz || r.gray_rgb.is_some() != has_gray || !same_tags {
            return Err(Error::ShapeMismatch(format!(
                "patch `{}` has a different column set",
                r.patch_id
            )));
        }
        let mut row = vec![r.patch_id.clone()];
        let mut push = |t: &ColorTriple| row.extend(t.0.iter().map(|v| v.to_string()));
        push(&r.rgb);
        if let Some(x) = &r.xyz {
            push(x);
        }
        if let Some(g) = &r.gray_rgb {
            push(g);
        }
        for (_, c) in &r.corrected {
            push(c);
        }
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn gray_brightness(r: &PatchRecord) -> Result<f64> {
    let g = r
        .gray_rgb
        .ok_or_else(|| Error::MissingGrayReference(r.patch_id.clone()))?;
    let b = g.sum();
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::DegenerateSample(format!(
            "gray reference of `{}` has non-positive brightness",
            r.patch_id
        )));
    }
    Ok(b)
}

/// Divides each patch RGB by its gray-card brightness (component sum),
/// rescaled by the mean brightness so values stay in the input range.
pub fn remove_shading(records: &[PatchRecord]) -> Result<Vec<ColorTriple>> {
    let brightness = records.iter().map(gray_brightness).collect::<Result<Vec<_>>>()?;
    if brightness.is_empty() {
        return Ok(Vec::new());
    }
    let mean = brightness.iter().sum::<f64>() / brightness.len() as f64;
    Ok(records
        .iter()
        .zip(&brightness)
        .map(|(r, b)| r.rgb.scaled(mean / b))
        .collect())
}

/// Summary of per-patch ΔE values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEStats {
    pub mean: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
    pub space: ColorSpace,
}

/// Quantile by linear interpolation between order statistics (R type 7).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DeltaEStats {
    pub fn from_values(values: &[f64], space: ColorSpace) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ShapeMismatch("no ΔE values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
            max: sorted[sorted.len() - 1],
            space,
        })
    }
}

pub fn per_patch_delta_e(
    corrected: &[ColorTriple],
    reference: &[ColorTriple],
    white: &WhitePoint,
    space: ColorSpace,
) -> Result<Vec<f64>> {
    if corrected.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} corrected rows vs {} reference rows",
            corrected.len(),
            reference.len()
        )));
    }
    corrected
        .iter()
        .zip(reference)
        .map(|(c, r)| delta_e_xyz(c, r, white, space))
        .collect()
}

pub fn evaluate(
    corrected: &[ColorTriple],
    reference: &[ColorTriple],
    white: &WhitePoint,
    space: ColorSpace,
) -> Result<DeltaEStats> {
    DeltaEStats::from_values(&per_patch_delta_e(corrected, reference, white, space)?, space)
}

/// `method,space,mean,median,q95,max` with two decimals.
pub fn write_stats<W: Write>(mut sink: W, rows: &[(String, DeltaEStats)]) -> Result<()> {
    writeln!(sink, "method,space,mean,median,q95,max")?;
    for (method, s) in rows {
        writeln!(
            sink,
            "{},{},{:.2},{:.2},{:.2},{:.2}",
            method,
            s.space.tag(),
            s.mean,
            s.median,
            s.q95,
            s.max
        )?;
    }
    Ok(())
}

/// A correction matrix on disk with its `# key: value` metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub matrix: Matrix3<f64>,
    pub metadata: Vec<(String, String)>,
}

pub const MATRIX_CONVENTION_LINE: &str = "# row-vector convention: xyz = rgb * H";

impl MatrixFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{MATRIX_CONVENTION_LINE}")?;
        for (k, v) in &self.metadata {
            writeln!(sink, "# {k}: {v}")?;
        }
        for i in 0..3 {
            let m = &self.matrix;
            writeln!(sink, "{} {} {}", m[(i, 0)], m[(i, 1)], m[(i, 2)])?;
        }
        Ok(())
    }

    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let lineno = idx as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once(':') {
                    let key = k.trim();
                    if key != "row-vector convention" {
                        metadata.push((key.to_string(), v.trim().to_string()));
                    }
                }
                continue;
            }
            let values = trimmed
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            if values.len() != 3 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected three finite numbers".into(),
                });
            }
            if rows.len() == 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "more than three matrix rows".into(),
                });
            }
            rows.push([values[0], values[1], values[2]]);
        }
        if rows.len() != 3 {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected three matrix rows, found {}", rows.len()),
            });
        }
        Ok(Self {
            matrix: Matrix3::from_fn(|i, j| rows[i][j]),
            metadata,
        })
    }
}
