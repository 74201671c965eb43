//! Deterministic output writers. Every float is rendered with a fixed
//! scientific-notation precision so identical runs produce identical bytes,
//! and every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::SweepRow;

pub fn fmt_float(x: f64, precision: usize) -> String {
    format!("{x:.precision$e}")
}

/// Write-then-rename so readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One line per sample: index, the parameter point, then per-state blocks
/// (energy, width, rigidity, entropy), then the scalar diagnostics.
pub fn sweep_csv(rows: &[SweepRow], precision: usize) -> String {
    let n_states = rows.first().map_or(0, |r| r.energies.len());
    let n_channels = rows.first().map_or(0, |r| r.omegas.len());
    let mut out = String::new();
    out.push_str("index,a");
    for c in 0..n_channels {
        write!(out, ",omega{c}_re,omega{c}_im").unwrap();
    }
    for i in 0..n_states {
        write!(out, ",E_{i},Gamma_{i},r_{i},H_{i}").unwrap();
    }
    out.push_str(",defect,min_gap,equilibrium\n");
    for r in rows {
        write!(out, "{},{}", r.index, fmt_float(r.a, precision)).unwrap();
        for w in &r.omegas {
            write!(out, ",{},{}", fmt_float(w.re, precision), fmt_float(w.im, precision)).unwrap();
        }
        for i in 0..n_states {
            write!(
                out,
                ",{},{},{},{}",
                fmt_float(r.energies[i], precision),
                fmt_float(r.widths[i], precision),
                fmt_float(r.rigidities[i], precision),
                fmt_float(r.entropies[i], precision)
            )
            .unwrap();
        }
        write!(
            out,
            ",{},{},{}\n",
            fmt_float(r.defect, precision),
            fmt_float(r.min_gap, precision),
            u8::from(r.equilibrium)
        )
        .unwrap();
    }
    out
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], precision: usize) -> Result<()> {
    write_atomic(path, &sweep_csv(rows, precision))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, &text)
}

/// Whitespace-separated per-family tables (one value column per state),
/// ready for gnuplot: `<prefix>_<family>.dat` with a `#` header line.
pub fn write_plot_data(dir: &Path, prefix: &str, rows: &[SweepRow], precision: usize) -> Result<()> {
    let n_states = rows.first().map_or(0, |r| r.energies.len());
    let families: [(&str, fn(&SweepRow) -> &[f64]); 4] = [
        ("energies", |r| &r.energies),
        ("widths", |r| &r.widths),
        ("rigidities", |r| &r.rigidities),
        ("entropies", |r| &r.entropies),
    ];
    for (name, get) in families {
        let mut out = String::from("# a");
        for i in 0..n_states {
            write!(out, " {name}_{i}").unwrap();
        }
        out.push('\n');
        for r in rows {
            out.push_str(&fmt_float(r.a, precision));
            for v in get(r) {
                out.push(' ');
                out.push_str(&fmt_float(*v, precision));
            }
            out.push('\n');
        }
        write_atomic(&dir.join(format!("{prefix}_{name}.dat")), &out)?;
    }
    let mut out = String::from("# a defect min_gap equilibrium\n");
    for r in rows {
        writeln!(
            out,
            "{} {} {} {}",
            fmt_float(r.a, precision),
            fmt_float(r.defect, precision),
            fmt_float(r.min_gap, precision),
            u8::from(r.equilibrium)
        )
        .unwrap();
    }
    write_atomic(&dir.join(format!("{prefix}_scalars.dat")), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn row(index: usize, a: f64) -> SweepRow {
        SweepRow {
            index,
            a,
            omegas: vec![C64::new(0.25, -0.5)],
            energies: vec![1.0, 2.0],
            widths: vec![0.1, 0.2],
            rigidities: vec![0.9, 0.8],
            entropies: vec![0.5, 0.6],
            defect: 1e-4,
            min_gap: 1.0,
            equilibrium: false,
        }
    }

    #[test]
    fn csv_layout_and_determinism() {
        let rows = vec![row(0, 0.0), row(1, 0.5)];
        let text = sweep_csv(&rows, 3);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "index,a,omega0_re,omega0_im,E_0,Gamma_0,r_0,H_0,E_1,Gamma_1,r_1,H_1,defect,min_gap,equilibrium"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,0.000e0,2.500e-1,-5.000e-1,1.000e0,1.000e-1,9.000e-1,5.000e-1,2.000e0,2.000e-1,8.000e-1,6.000e-1,1.000e-4,1.000e0,0"
        );
        assert_eq!(text, sweep_csv(&rows, 3));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        write_atomic(&target, "first").unwrap();
        write_atomic(&target, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&target).unwrap(), "second");
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn plot_files_per_family() {
        let dir = tempfile::tempdir().unwrap();
        write_plot_data(dir.path(), "t", &[row(0, 0.0)], 6).unwrap();
        for f in ["t_energies.dat", "t_widths.dat", "t_rigidities.dat", "t_entropies.dat", "t_scalars.dat"] {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.starts_with("# a"), "{f}: {text}");
            assert_eq!(text.lines().count(), 2);
        }
    }
}
