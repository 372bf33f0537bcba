//! File formats: snapshot binaries, CSV tables, correlation matrices,
//! PPM images and key-value metrics.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{PolarizedField, TemporalGrid};
use crate::nlse::{Spectrum, Trajectory};
use crate::quantum_meas::{CorrelationKind, CorrelationMatrix, Domain, SlotSpec};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"FCSNAP\0\0";
pub const MATRIX_MAGIC: [u8; 8] = *b"FCCORR\0\0";
pub const FORMAT_VERSION: u32 = 1;

/// Sample precision of a snapshot file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Complex64,
    Complex128,
}

impl Precision {
    pub fn code(&self) -> u32 {
        match self {
            Precision::Complex64 => 1,
            Precision::Complex128 => 2,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            1 => Ok(Precision::Complex64),
            2 => Ok(Precision::Complex128),
            _ => Err(Error::Format(format!("unknown sample format code {c}"))),
        }
    }
}

/// Header of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub precision: Precision,
    pub grid: TemporalGrid,
    pub n_steps: u64,
    pub d_zeta: f64,
    pub stride: u64,
    pub descriptor: String,
}

/// A snapshot file read back into memory.
#[derive(Debug, Clone)]
pub struct SnapshotFile {
    pub header: SnapshotHeader,
    /// `(zeta, field)` records in file order.
    pub records: Vec<(f64, PolarizedField)>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

struct Le<W: Write>(W);

impl<W: Write> Le<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
    fn samples(&mut self, v: &[C64], p: Precision) -> Result<()> {
        for z in v {
            match p {
                Precision::Complex64 => {
                    self.0.write_all(&(z.re as f32).to_le_bytes())?;
                    self.0.write_all(&(z.im as f32).to_le_bytes())?;
                }
                Precision::Complex128 => {
                    self.f64(z.re)?;
                    self.f64(z.im)?;
                }
            }
        }
        Ok(())
    }
}

struct LeRead<R: Read>(R);

impl<R: Read> LeRead<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated string: {e}")))?;
        String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))
    }
    fn samples(&mut self, n: usize, p: Precision) -> Result<Vec<C64>> {
        (0..n)
            .map(|_| match p {
                Precision::Complex64 => {
                    let re = f32::from_le_bytes(self.bytes()?);
                    let im = f32::from_le_bytes(self.bytes()?);
                    Ok(C64::new(re as f64, im as f64))
                }
                Precision::Complex128 => Ok(C64::new(self.f64()?, self.f64()?)),
            })
            .collect()
    }
}

/// Writes a header and `(zeta, field)` records.
pub fn write_snapshots<'a>(
    path: &Path,
    header: &SnapshotHeader,
    records: impl ExactSizeIterator<Item = (f64, &'a PolarizedField)>,
) -> Result<()> {
    let mut w = Le(create(path)?);
    w.0.write_all(&SNAPSHOT_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u32(header.precision.code())?;
    w.u64(header.grid.n_points() as u64)?;
    w.f64(header.grid.tau_min())?;
    w.f64(header.grid.tau_max())?;
    w.u64(header.n_steps)?;
    w.f64(header.d_zeta)?;
    w.u64(header.stride)?;
    w.str(&header.descriptor)?;
    w.u64(records.len() as u64)?;
    for (zeta, f) in records {
        if f.grid() != &header.grid {
            return Err(Error::InvalidArgument("record grid differs from header grid".into()));
        }
        w.f64(zeta)?;
        w.samples(f.ux(), header.precision)?;
        w.samples(f.uy(), header.precision)?;
    }
    w.0.flush()?;
    Ok(())
}

/// Exports every `stride`-th snapshot of a trajectory (the output is always
/// included).
pub fn write_trajectory(path: &Path, traj: &Trajectory, precision: Precision, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let n = traj.n_steps();
    let mut ks: Vec<usize> = (0..=n).step_by(stride).collect();
    if *ks.last().expect("k = 0 present") != n {
        ks.push(n);
    }
    let snaps: Vec<(f64, PolarizedField)> = ks
        .iter()
        .map(|&k| (traj.zeta(k), traj.snapshot(k).into_owned()))
        .collect();
    let header = SnapshotHeader {
        precision,
        grid: *traj.grid(),
        n_steps: n as u64,
        d_zeta: traj.d_zeta(),
        stride: stride as u64,
        descriptor: traj.profile().descriptor(),
    };
    write_snapshots(path, &header, snaps.iter().map(|(z, f)| (*z, f)))
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotFile> {
    let mut r = LeRead(BufReader::new(File::open(path)?));
    if r.bytes::<8>()? != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a snapshot file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let precision = Precision::from_code(r.u32()?)?;
    let n_points = r.u64()? as usize;
    let (tau_min, tau_max) = (r.f64()?, r.f64()?);
    let grid = TemporalGrid::new(n_points, tau_min, tau_max)?;
    let header = SnapshotHeader {
        precision,
        grid,
        n_steps: r.u64()?,
        d_zeta: r.f64()?,
        stride: r.u64()?,
        descriptor: r.str()?,
    };
    let count = r.u64()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let zeta = r.f64()?;
        let ux = r.samples(n_points, precision)?;
        let uy = r.samples(n_points, precision)?;
        records.push((zeta, PolarizedField::new(grid, ux, uy)?));
    }
    Ok(SnapshotFile { header, records })
}

/// One snapshot as CSV: `tau,re_ux,im_ux,re_uy,im_uy`.
pub fn write_snapshot_csv(path: &Path, field: &PolarizedField) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "tau,re_ux,im_ux,re_uy,im_uy")?;
    for (i, (x, y)) in field.ux().iter().zip(field.uy()).enumerate() {
        writeln!(w, "{:?},{:e},{:e},{:e},{:e}", field.grid().tau(i), x.re, x.im, y.re, y.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Total and split spectra as CSV: `omega,total,first,second`.
pub fn write_spectra_csv(path: &Path, total: &Spectrum, first: &Spectrum, second: &Spectrum) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "omega,total,first,second")?;
    for i in 0..total.omega.len() {
        writeln!(
            w,
            "{:?},{:e},{:e},{:e}",
            total.omega[i], total.power[i], first.power[i], second.power[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column CSV with the given header.
pub fn write_pairs_csv(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for (a, b) in rows {
        writeln!(w, "{a:?},{b:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Snapshot indices and sample indices used for an intensity map of at
/// most `max_rows x max_cols` cells.
fn map_layout(traj: &Trajectory, max_rows: usize, max_cols: usize) -> (Vec<usize>, Vec<usize>) {
    let n = traj.n_steps();
    let row_stride = n.div_ceil(max_rows.max(1)).max(1);
    let mut rows: Vec<usize> = (0..=n).step_by(row_stride).collect();
    if *rows.last().expect("row 0 present") != n {
        rows.push(n);
    }
    let m = traj.grid().n_points();
    let col_stride = m.div_ceil(max_cols.max(1)).max(1);
    (rows, (0..m).step_by(col_stride).collect())
}

/// `|U|^2` on a subsampled `(zeta, tau)` lattice: header row holds the
/// `tau` values, each following row starts with `zeta`.
pub fn write_intensity_csv(path: &Path, traj: &Trajectory, max_rows: usize, max_cols: usize) -> Result<()> {
    let (rows, cols) = map_layout(traj, max_rows, max_cols);
    let mut w = create(path)?;
    let mut line = String::from("zeta\\tau");
    for &c in &cols {
        write!(line, ",{:?}", traj.grid().tau(c)).expect("write to string");
    }
    writeln!(w, "{line}")?;
    for &k in &rows {
        let inten = traj.snapshot(k).intensity();
        let mut line = format!("{:?}", traj.zeta(k));
        for &c in &cols {
            write!(line, ",{:e}", inten[c]).expect("write to string");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Intensity map as a P6 image: one row per stored `zeta` (input at the
/// bottom), one column per `tau` sample, gray level `255 * sqrt(I / I_max)`.
pub fn write_intensity_ppm(path: &Path, traj: &Trajectory, max_rows: usize, max_cols: usize) -> Result<()> {
    let (rows, cols) = map_layout(traj, max_rows, max_cols);
    let maps: Vec<Vec<f64>> = rows.iter().map(|&k| traj.snapshot(k).intensity()).collect();
    let peak = maps.iter().flatten().cloned().fold(0.0, f64::max);
    let mut pixels = Vec::with_capacity(rows.len() * cols.len() * 3);
    for row in maps.iter().rev() {
        for &c in &cols {
            let level = if peak > 0.0 { (row[c] / peak).sqrt() } else { 0.0 };
            let g = (255.0 * level).round().clamp(0.0, 255.0) as u8;
            pixels.extend_from_slice(&[g, g, g]);
        }
    }
    write_ppm(path, cols.len(), rows.len(), &pixels)
}

fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    w.flush()?;
    Ok(())
}

/// Reads a P6 image back as `(width, height, rgb)`.
pub fn read_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let data = std::fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    let bad = || Error::Format("malformed PPM header".into());
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad());
    }
    let width: usize = fields[1].parse().map_err(|_| bad())?;
    let height: usize = fields[2].parse().map_err(|_| bad())?;
    let rgb = data.get(pos..).ok_or_else(bad)?.to_vec();
    if rgb.len() != width * height * 3 {
        return Err(Error::Format("PPM pixel data has the wrong length".into()));
    }
    Ok((width, height, rgb))
}

/// Color of negative extreme (-1).
pub const COLD: [u8; 3] = [33, 102, 172];
/// Color of positive extreme (+1).
pub const HOT: [u8; 3] = [178, 24, 43];
/// Color of masked entries.
pub const MASKED: [u8; 3] = [128, 128, 128];

/// The fixed 256-entry diverging map: entries 0..=127 run linearly from
/// [`COLD`] to white, entries 128..=255 from white to [`HOT`].
pub fn diverging_colormap() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    for (k, entry) in table.iter_mut().enumerate() {
        let (end, s) = if k <= 127 { (COLD, 127 - k) } else { (HOT, k - 128) };
        for c in 0..3 {
            let drop = (255 - end[c] as usize) * s;
            entry[c] = (255 - (drop + 63) / 127) as u8;
        }
    }
    table
}

/// Color-map index of a value clamped to `[-1, 1]`.
pub fn colormap_index(v: f64) -> usize {
    let t = (v.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0;
    t.round() as usize
}

/// Sidecar path of a heatmap image.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".axes.txt");
    PathBuf::from(s)
}

/// Renders a correlation matrix as a P6 image. Entry `(i, j)` covers a
/// `scale x scale` block with row `i` counted from the top and column `j`
/// from the left. Axis metadata goes to [`sidecar_path`].
pub fn emit_heatmap(matrix: &CorrelationMatrix, path: &Path) -> Result<()> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot render an empty matrix".into()));
    }
    let scale = (256 / n).max(1);
    let table = diverging_colormap();
    let side = n * scale;
    let mut pixels = Vec::with_capacity(side * side * 3);
    for i in 0..n {
        let row: Vec<[u8; 3]> = (0..n)
            .map(|j| matrix.get(i, j).map_or(MASKED, |v| table[colormap_index(v)]))
            .collect();
        for _ in 0..scale {
            for px in &row {
                for _ in 0..scale {
                    pixels.extend_from_slice(px);
                }
            }
        }
    }
    write_ppm(path, side, side, &pixels)?;

    let mut s = String::new();
    writeln!(s, "image = {}", path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()).ok();
    writeln!(s, "kind = {}", matrix.kind.name()).ok();
    writeln!(s, "domain = {}", matrix.slots.domain.name()).ok();
    writeln!(s, "slots = {n}").ok();
    writeln!(s, "pixels_per_slot = {scale}").ok();
    writeln!(s, "rows = slot i from top to bottom").ok();
    writeln!(s, "columns = slot j from left to right").ok();
    writeln!(s, "value_range = -1 1 (clamped)").ok();
    writeln!(s, "masked_color = {} {} {}", MASKED[0], MASKED[1], MASKED[2]).ok();
    writeln!(s, "slot_width = {:?}", matrix.slots.width).ok();
    writeln!(s, "centers = {}", join_f64(&matrix.slots.centers)).ok();
    let mut w = create(&sidecar_path(path))?;
    w.write_all(s.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

/// Text form of a correlation matrix: `#`-prefixed header lines followed
/// by one row per slot, entries in `%.9e` with `NaN` for masked ones.
pub fn write_matrix_text(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    let mut w = create(path)?;
    let masked = m.masked.iter().filter(|&&b| b).count();
    writeln!(w, "# kind = {}", m.kind.name())?;
    writeln!(w, "# domain = {}", m.slots.domain.name())?;
    writeln!(w, "# theta = {:?}", m.theta)?;
    writeln!(w, "# slots = {}", m.len())?;
    writeln!(w, "# width = {:?}", m.slots.width)?;
    writeln!(w, "# centers = {}", join_f64(&m.slots.centers))?;
    writeln!(w, "# masked = {masked}")?;
    writeln!(w, "# imag_residue = {:e}", m.imag_residue)?;
    writeln!(w, "# meta = {}", m.meta)?;
    let n = m.len();
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| m.get(i, j).map_or("NaN".to_string(), |v| format!("{v:.9e}")))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary form of a correlation matrix, little-endian: magic, version,
/// kind, domain, theta, width, imaginary residue, meta, slot count, centers,
/// row-major `f64` values (NaN where masked), one mask byte per entry.
pub fn write_matrix_binary(path: &Path, m: &CorrelationMatrix) -> Result<()> {
    let mut w = Le(create(path)?);
    w.0.write_all(&MATRIX_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.str(m.kind.name())?;
    w.str(m.slots.domain.name())?;
    w.f64(m.theta)?;
    w.f64(m.slots.width)?;
    w.f64(m.imag_residue)?;
    w.str(&m.meta)?;
    w.u64(m.len() as u64)?;
    for &c in &m.slots.centers {
        w.f64(c)?;
    }
    for &v in &m.values {
        w.f64(v)?;
    }
    let mask: Vec<u8> = m.masked.iter().map(|&b| b as u8).collect();
    w.0.write_all(&mask)?;
    w.0.flush()?;
    Ok(())
}

pub fn read_matrix_binary(path: &Path) -> Result<CorrelationMatrix> {
    let mut r = LeRead(BufReader::new(File::open(path)?));
    if r.bytes::<8>()? != MATRIX_MAGIC {
        return Err(Error::Format("not a correlation matrix file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind_name = r.str()?;
    let kind = CorrelationKind::parse(&kind_name).ok_or_else(|| Error::Format(format!("unknown kind {kind_name}")))?;
    let domain_name = r.str()?;
    let domain = Domain::parse(&domain_name).ok_or_else(|| Error::Format(format!("unknown domain {domain_name}")))?;
    let theta = r.f64()?;
    let width = r.f64()?;
    let imag_residue = r.f64()?;
    let meta = r.str()?;
    let n = r.u64()? as usize;
    let centers = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let values = (0..n * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut mask = vec![0u8; n * n];
    r.0.read_exact(&mut mask)
        .map_err(|e| Error::Format(format!("truncated mask: {e}")))?;
    Ok(CorrelationMatrix {
        slots: SlotSpec::new(domain, centers, width),
        kind,
        values,
        masked: mask.into_iter().map(|b| b != 0).collect(),
        theta,
        meta,
        imag_residue,
    })
}

/// Ordered `key = value` summary of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    entries: Vec<(String, String)>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.text(key, format!("{value:?}"));
    }

    pub fn list(&mut self, key: impl Into<String>, values: &[f64]) {
        self.text(key, join_f64(values));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").expect("write to string");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        w.write_all(self.to_text().as_bytes())?;
        w.flush()?;
        Ok(())
    }
}
