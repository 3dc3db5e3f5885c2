//! Mixed-type datasets, missingness bookkeeping and design-matrix encoding.
//!
//! Values are stored column-major as `f64`. Binary columns hold `0.0`/`1.0`,
//! categorical columns hold the category index, and masked cells hold `NaN`
//! alongside a `true` entry in the mask.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale a column is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
            ColumnKind::Categorical => "categorical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category labels; only meaningful for categorical columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Binary,
            categories: Vec::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    /// Parse one CSV cell. `None` means the cell is a missing token.
    pub fn parse_cell(&self, raw: &str) -> std::result::Result<Option<f64>, String> {
        if is_missing_token(raw) {
            return Ok(None);
        }
        match self.kind {
            ColumnKind::Continuous => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                Ok(_) => Err(format!("non-finite value `{raw}`")),
                Err(_) => Err(format!("`{raw}` is not numeric")),
            },
            ColumnKind::Binary => match raw.parse::<f64>() {
                Ok(v) if v == 0.0 || v == 1.0 => Ok(Some(v)),
                _ => Err(format!("binary column holds `{raw}`, expected 0 or 1")),
            },
            ColumnKind::Categorical => self
                .categories
                .iter()
                .position(|c| c == raw)
                .map(|i| Some(i as f64))
                .ok_or_else(|| format!("`{raw}` is not one of the declared categories")),
        }
    }

    /// Render a stored value back to its CSV form.
    pub fn format_value(&self, value: f64) -> String {
        match self.kind {
            ColumnKind::Continuous => format!("{value}"),
            ColumnKind::Binary => {
                if value == 0.0 {
                    "0".to_string()
                } else {
                    "1".to_string()
                }
            }
            ColumnKind::Categorical => self.categories[value as usize].clone(),
        }
    }

    /// Whether `value` is a legal stored value for this column.
    pub fn validate_value(&self, value: f64) -> bool {
        match self.kind {
            ColumnKind::Continuous => value.is_finite(),
            ColumnKind::Binary => value == 0.0 || value == 1.0,
            ColumnKind::Categorical => {
                value.fract() == 0.0 && value >= 0.0 && (value as usize) < self.categories.len()
            }
        }
    }
}

/// Empty cells and the literal `NA` are missing.
pub fn is_missing_token(raw: &str) -> bool {
    raw.is_empty() || raw == "NA"
}

/// Ordered list of column specifications with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Schema { columns };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if c.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            match c.kind {
                ColumnKind::Categorical => {
                    if c.categories.len() < 2 {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` needs at least 2 categories",
                            c.name
                        )));
                    }
                    let distinct: HashSet<_> = c.categories.iter().collect();
                    if distinct.len() != c.categories.len() {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` repeats a category",
                            c.name
                        )));
                    }
                    if c.categories.iter().any(|l| is_missing_token(l)) {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` uses a missing token as a label",
                            c.name
                        )));
                    }
                }
                _ if !c.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "only categorical columns take categories (`{}`)",
                        c.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parse the TOML schema format:
    ///
    /// ```toml
    /// [[column]]
    /// name = "religion"
    /// kind = "categorical"
    /// categories = ["protestant", "catholic", "other"]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Columnar table with an explicit missingness mask (`true` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
}

impl Dataset {
    /// Build a dataset from per-column cells, `None` marking a missing cell.
    pub fn from_cells(schema: Schema, cells: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if cells.len() != schema.len() {
            return Err(Error::InvalidArgument(format!(
                "{} columns supplied for a schema of {}",
                cells.len(),
                schema.len()
            )));
        }
        let n = cells.first().map_or(0, Vec::len);
        let mut columns = Vec::with_capacity(cells.len());
        let mut mask = Vec::with_capacity(cells.len());
        for (spec, col) in schema.columns.iter().zip(cells) {
            if col.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            let mut values = Vec::with_capacity(n);
            let mut missing = Vec::with_capacity(n);
            for (row, cell) in col.into_iter().enumerate() {
                match cell {
                    Some(v) if spec.validate_value(v) => {
                        values.push(v);
                        missing.push(false);
                    }
                    Some(v) => {
                        return Err(Error::TypeViolation {
                            row: row + 1,
                            column: spec.name.clone(),
                            message: format!("value {v} does not fit a {} column", spec.kind),
                        })
                    }
                    None => {
                        values.push(f64::NAN);
                        missing.push(true);
                    }
                }
            }
            columns.push(values);
            mask.push(missing);
        }
        Ok(Dataset {
            schema,
            columns,
            mask,
        })
    }

    /// Build a fully observed dataset.
    pub fn from_complete(schema: Schema, columns: Vec<Vec<f64>>) -> Result<Self> {
        let cells = columns
            .into_iter()
            .map(|c| c.into_iter().map(Some).collect())
            .collect();
        Self::from_cells(schema, cells)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn spec(&self, col: usize) -> &ColumnSpec {
        &self.schema.columns[col]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.schema.index_of(name)
    }

    /// Raw values of a column; masked cells are `NaN`.
    pub fn values(&self, col: usize) -> &[f64] {
        &self.columns[col]
    }

    pub fn mask(&self, col: usize) -> &[bool] {
        &self.mask[col]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if self.mask[col][row] {
            None
        } else {
            Some(self.columns[col][row])
        }
    }

    pub fn missing_count(&self, col: usize) -> usize {
        self.mask[col].iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|m| m.iter().all(|&x| !x))
    }

    /// Columns that still have at least one masked cell.
    pub fn incomplete_columns(&self) -> Vec<usize> {
        (0..self.ncols())
            .filter(|&j| self.missing_count(j) > 0)
            .collect()
    }

    /// Overwrite a whole column with observed values.
    pub(crate) fn set_column(&mut self, col: usize, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.nrows());
        debug_assert!(values.iter().all(|&v| self.schema.columns[col].validate_value(v)));
        self.columns[col] = values;
        self.mask[col].iter_mut().for_each(|m| *m = false);
    }

    /// Fill the masked cells of `col` from `fill` (indexed by row); observed
    /// cells keep their stored bits.
    pub fn fill_missing(&mut self, col: usize, fill: &[f64]) -> Result<()> {
        if fill.len() != self.nrows() {
            return Err(Error::InvalidArgument("fill length mismatch".into()));
        }
        let spec = &self.schema.columns[col];
        for row in 0..self.nrows() {
            if self.mask[col][row] {
                let v = fill[row];
                if !spec.validate_value(v) {
                    return Err(Error::TypeViolation {
                        row: row + 1,
                        column: spec.name.clone(),
                        message: format!("imputed value {v} does not fit a {} column", spec.kind),
                    });
                }
                self.columns[col][row] = v;
                self.mask[col][row] = false;
            }
        }
        Ok(())
    }

    /// Read a header-bearing CSV file and validate it against `schema`.
    pub fn load_csv(path: &Path, schema: &Schema) -> Result<Self> {
        let file = fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut position = Vec::with_capacity(headers.len());
        let mut seen = HashSet::new();
        for h in headers.iter() {
            let idx = schema.index_of(h)?;
            if !seen.insert(idx) {
                return Err(Error::Schema(format!("header repeats column `{h}`")));
            }
            position.push(idx);
        }
        if let Some(missing) = schema.columns.iter().enumerate().find(|(i, _)| !seen.contains(i)) {
            return Err(Error::Schema(format!(
                "column `{}` is declared in the schema but absent from the file",
                missing.1.name
            )));
        }
        let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != position.len() {
                return Err(Error::RaggedRow {
                    row,
                    expected: position.len(),
                    found: record.len(),
                });
            }
            for (field, &col) in record.iter().zip(&position) {
                let spec = &schema.columns[col];
                let cell = spec.parse_cell(field).map_err(|message| Error::TypeViolation {
                    row,
                    column: spec.name.clone(),
                    message,
                })?;
                cells[col].push(cell);
            }
        }
        Self::from_cells(schema.clone(), cells)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.nrows() {
            let fields: Vec<String> = (0..self.ncols())
                .map(|col| match self.get(row, col) {
                    Some(v) => self.spec(col).format_value(v),
                    None => "NA".to_string(),
                })
                .collect();
            wtr.write_record(&fields)?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Missingness indicator of `var` (`true` where missing).
pub fn missing_indicator(ds: &Dataset, var: &str) -> Result<Vec<bool>> {
    let col = ds.index_of(var)?;
    Ok(ds.mask(col).to_vec())
}

/// How categorical sources become indicator columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorCoding {
    /// One indicator per category.
    #[default]
    Full,
    /// Omit the first category, keeping designs full rank.
    DropReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOptions {
    /// Highest power added for continuous columns (1 = raw values only).
    pub moments: u32,
    /// Pairs of variables whose encoded columns are multiplied elementwise.
    pub interactions: Vec<(String, String)>,
    pub coding: IndicatorCoding,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            moments: 1,
            interactions: Vec::new(),
            coding: IndicatorCoding::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub variable: String,
    pub category: Option<String>,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.category {
            Some(c) => write!(f, "{}[{}]", self.variable, c),
            None => f.write_str(&self.variable),
        }
    }
}

/// Provenance of one design-matrix column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureLabel {
    pub term: Term,
    pub power: u32,
    pub partner: Option<Term>,
    /// Column only takes values in {0, 1}.
    pub indicator: bool,
}

impl fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.term)?;
        if self.power > 1 {
            write!(f, "^{}", self.power)?;
        }
        if let Some(p) = &self.partner {
            write!(f, ":{p}")?;
        }
        Ok(())
    }
}

/// Numeric design matrix with per-column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: DMatrix<f64>,
    pub labels: Vec<FeatureLabel>,
    /// Dataset row each matrix row came from.
    pub row_index: Vec<usize>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// Keep the listed matrix rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let data = DMatrix::from_fn(rows.len(), self.ncols(), |i, j| self.data[(rows[i], j)]);
        FeatureMatrix {
            data,
            labels: self.labels.clone(),
            row_index: rows.iter().map(|&r| self.row_index[r]).collect(),
        }
    }
}

struct EncodedBlock {
    columns: Vec<Vec<f64>>,
    labels: Vec<FeatureLabel>,
}

fn encode_base(ds: &Dataset, col: usize, coding: IndicatorCoding) -> EncodedBlock {
    let spec = ds.spec(col);
    let values = ds.values(col);
    match spec.kind {
        ColumnKind::Continuous | ColumnKind::Binary => EncodedBlock {
            columns: vec![values.to_vec()],
            labels: vec![FeatureLabel {
                term: Term {
                    variable: spec.name.clone(),
                    category: None,
                },
                power: 1,
                partner: None,
                indicator: spec.kind == ColumnKind::Binary,
            }],
        },
        ColumnKind::Categorical => {
            let skip = usize::from(coding == IndicatorCoding::DropReference);
            let mut columns = Vec::new();
            let mut labels = Vec::new();
            for (k, label) in spec.categories.iter().enumerate().skip(skip) {
                let code = k as f64;
                columns.push(
                    values
                        .iter()
                        .map(|&v| if v == code { 1.0 } else { 0.0 })
                        .collect(),
                );
                labels.push(FeatureLabel {
                    term: Term {
                        variable: spec.name.clone(),
                        category: Some(label.clone()),
                    },
                    power: 1,
                    partner: None,
                    indicator: true,
                });
            }
            EncodedBlock { columns, labels }
        }
    }
}

/// Encode every variable except `exclude` into a numeric design matrix.
///
/// Categorical sources become indicator columns, continuous sources
/// contribute their raw values plus powers `2..=moments`, and each requested
/// interaction adds the elementwise products of the two sources' base
/// encodings.
pub fn encode_features(
    ds: &Dataset,
    exclude: Option<&str>,
    options: &EncodeOptions,
) -> Result<FeatureMatrix> {
    if options.moments < 1 {
        return Err(Error::InvalidArgument("moments must be at least 1".into()));
    }
    let excluded = exclude.map(|name| ds.index_of(name)).transpose()?;
    let mut interactions = Vec::with_capacity(options.interactions.len());
    for (a, b) in &options.interactions {
        let ia = ds.index_of(a)?;
        let ib = ds.index_of(b)?;
        if Some(ia) == excluded || Some(ib) == excluded {
            return Err(Error::InvalidArgument(format!(
                "interaction {a}:{b} references the excluded variable"
            )));
        }
        if ia == ib {
            return Err(Error::InvalidArgument(format!(
                "interaction {a}:{b} pairs a variable with itself"
            )));
        }
        interactions.push((ia, ib));
    }

    let included: Vec<usize> = (0..ds.ncols()).filter(|&j| Some(j) != excluded).collect();
    for &j in &included {
        if ds.missing_count(j) > 0 {
            return Err(Error::Incomplete(ds.spec(j).name.clone()));
        }
    }

    let n = ds.nrows();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<FeatureLabel> = Vec::new();
    for &j in &included {
        let block = encode_base(ds, j, options.coding);
        let continuous = ds.spec(j).kind == ColumnKind::Continuous;
        for (col, label) in block.columns.into_iter().zip(block.labels) {
            let powers: Vec<(Vec<f64>, FeatureLabel)> = if continuous {
                (2..=options.moments)
                    .map(|power| {
                        let c = col.iter().map(|&v| v.powi(power as i32)).collect();
                        (c, FeatureLabel { power, ..label.clone() })
                    })
                    .collect()
            } else {
                Vec::new()
            };
            columns.push(col);
            labels.push(label);
            for (c, l) in powers {
                columns.push(c);
                labels.push(l);
            }
        }
    }
    for (ia, ib) in interactions {
        let left = encode_base(ds, ia, options.coding);
        let right = encode_base(ds, ib, options.coding);
        for (lc, ll) in left.columns.iter().zip(&left.labels) {
            for (rc, rl) in right.columns.iter().zip(&right.labels) {
                columns.push(lc.iter().zip(rc).map(|(a, b)| a * b).collect());
                labels.push(FeatureLabel {
                    term: ll.term.clone(),
                    power: 1,
                    partner: Some(rl.term.clone()),
                    indicator: ll.indicator && rl.indicator,
                });
            }
        }
    }
    let data = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    Ok(FeatureMatrix {
        data,
        labels,
        row_index: (0..n).collect(),
    })
}

/// `m` completed copies of a dataset produced by one imputation setup.
#[derive(Debug, Clone)]
pub struct ImputationRun {
    /// Label of the method assignment, e.g. `pmm` or `mixed`.
    pub method: String,
    pub datasets: Vec<Dataset>,
    pub seed: u64,
    /// Chained-equation sweep count.
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_xyz() -> Schema {
        Schema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::binary("z"),
            ColumnSpec::continuous("y"),
        ])
        .unwrap()
    }

    #[test]
    fn na_token_is_masked() {
        let text = "x,z,y\n1.5,0,2\n2.5,1,NA\n3,1,4\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert_eq!(ds.nrows(), 3);
        let m = missing_indicator(&ds, "y").unwrap();
        assert_eq!(m, vec![false, true, false]);
        assert!(missing_indicator(&ds, "x").unwrap().iter().all(|&b| !b));
        assert!(ds.values(2)[1].is_nan());
    }

    #[test]
    fn empty_cell_is_missing_and_na_is_case_sensitive() {
        let text = "x,z,y\n,0,1\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert!(ds.mask(0)[0]);
        let bad = "x,z,y\nna,0,1\n";
        assert!(matches!(
            Dataset::read_csv(bad.as_bytes(), &schema_xyz()),
            Err(Error::TypeViolation { .. })
        ));
    }

    #[test]
    fn binary_two_is_a_type_violation() {
        let text = "x,z,y\n1,0,2\n1,2,3\n";
        match Dataset::read_csv(text.as_bytes(), &schema_xyz()) {
            Err(Error::TypeViolation { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "z");
            }
            other => panic!("expected type violation, got {other:?}"),
        }
    }

    #[test]
    fn no_missing_tokens_gives_empty_mask() {
        let text = "x,z,y\n1,0,2\n2,1,3\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert!(ds.is_complete());
    }

    #[test]
    fn unknown_and_ragged_are_located() {
        let text = "x,z,w\n1,0,2\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes(), &schema_xyz()),
            Err(Error::UnknownColumn(c)) if c == "w"
        ));
        let text = "x,z,y\n1,0,2\n1,0\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes(), &schema_xyz()),
            Err(Error::RaggedRow { row: 2, expected: 3, found: 2 })
        ));
        let text = "x,z,y\n1,0,abc\n";
        assert!(matches!(
            Dataset::read_csv(text.as_bytes(), &schema_xyz()),
            Err(Error::TypeViolation { row: 1, .. })
        ));
    }

    #[test]
    fn header_order_may_differ_from_schema() {
        let text = "y,x,z\n5,1,0\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert_eq!(ds.values(0), &[1.0]);
        assert_eq!(ds.values(2), &[5.0]);
    }

    #[test]
    fn fully_missing_column() {
        let text = "x,z,y\n1,0,NA\n2,1,\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert_eq!(missing_indicator(&ds, "y").unwrap(), vec![true, true]);
        assert!(missing_indicator(&ds, "q").is_err());
    }

    #[test]
    fn schema_rules() {
        assert!(Schema::new(vec![ColumnSpec::continuous("a"), ColumnSpec::binary("a")]).is_err());
        assert!(Schema::new(vec![ColumnSpec::categorical("c", ["only"])]).is_err());
        let toml = r#"
            [[column]]
            name = "religion"
            kind = "categorical"
            categories = ["protestant", "catholic", "other"]

            [[column]]
            name = "age"
            kind = "continuous"
        "#;
        let s = Schema::from_toml_str(toml).unwrap();
        assert_eq!(s.columns[0].categories.len(), 3);
        assert_eq!(Schema::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn categorical_gets_one_indicator_per_category() {
        let schema = Schema::new(vec![
            ColumnSpec::categorical("r", ["a", "b", "c"]),
            ColumnSpec::continuous("y"),
        ])
        .unwrap();
        let ds = Dataset::from_complete(schema, vec![vec![0.0, 1.0, 2.0, 1.0], vec![0.0; 4]]).unwrap();
        let fm = encode_features(&ds, Some("y"), &EncodeOptions::default()).unwrap();
        assert_eq!(fm.ncols(), 3);
        assert_eq!(fm.data.column(1).iter().sum::<f64>(), 2.0);
        for i in 0..4 {
            assert_eq!(fm.data.row(i).sum(), 1.0);
        }
        let dropped = encode_features(
            &ds,
            Some("y"),
            &EncodeOptions {
                coding: IndicatorCoding::DropReference,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(dropped.ncols(), 2);
        assert_eq!(dropped.labels[0].to_string(), "r[b]");
    }

    #[test]
    fn continuous_moments_are_exact_powers() {
        let schema = Schema::new(vec![ColumnSpec::continuous("x")]).unwrap();
        let xs = vec![-1.5, 0.25, 3.0];
        let ds = Dataset::from_complete(schema, vec![xs.clone()]).unwrap();
        let fm = encode_features(
            &ds,
            None,
            &EncodeOptions {
                moments: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fm.ncols(), 2);
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(fm.data[(i, 0)], x);
            assert_eq!(fm.data[(i, 1)], x * x);
        }
        assert_eq!(fm.labels[1].to_string(), "x^2");
    }

    #[test]
    fn interaction_is_hand_product() {
        let schema = Schema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::binary("z"),
            ColumnSpec::continuous("y"),
        ])
        .unwrap();
        let ds = Dataset::from_complete(schema, vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![0.0, 0.0]])
            .unwrap();
        let fm = encode_features(
            &ds,
            Some("y"),
            &EncodeOptions {
                interactions: vec![("x".into(), "z".into())],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fm.ncols(), 3);
        assert_eq!(fm.data.column(2).as_slice(), &[0.0, 2.0]);
        assert_eq!(fm.labels[2].to_string(), "x:z");

        let err = encode_features(
            &ds,
            Some("y"),
            &EncodeOptions {
                interactions: vec![("x".into(), "y".into())],
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let err = encode_features(
            &ds,
            Some("y"),
            &EncodeOptions {
                moments: 0,
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn encoding_refuses_missing_cells() {
        let text = "x,z,y\n1,0,NA\n2,1,3\n";
        let ds = Dataset::read_csv(text.as_bytes(), &schema_xyz()).unwrap();
        assert!(encode_features(&ds, Some("y"), &EncodeOptions::default()).is_ok());
        assert!(matches!(
            encode_features(&ds, Some("x"), &EncodeOptions::default()),
            Err(Error::Incomplete(v)) if v == "y"
        ));
    }
}
