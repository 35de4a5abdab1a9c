//! Long-format plot data for time-averaged D-DGap curves.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use occo::runtime::GapTrace;

use crate::error::{HarnessError, Result};

pub const PLOTDATA_HEADER: &str = "t,series,avg_gap";

const SCRIPT_STUB: &str = r#"# Plot time-averaged D-DGap curves from the long-format CSV next to this file.
import sys
import pandas as pd
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
df = pd.read_csv(path)
fig, ax = plt.subplots()
for name, g in df.groupby("series"):
    ax.plot(g["t"], g["avg_gap"], label=name)
ax.set_xscale("log")
ax.set_xlabel("round t")
ax.set_ylabel("time-averaged D-DGap")
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#;

/// Write `(t, series, avg_gap)` rows to `out` and a matching plot script beside it.
/// Returns the script path.
pub fn emit_plotdata(traces: &[(String, &GapTrace)], out: &Path) -> Result<PathBuf> {
    if let Some((_, first)) = traces.first() {
        if traces.iter().any(|(_, t)| t.len() != first.len()) {
            return Err(HarnessError::Config("plot traces must share the round axis".into()));
        }
    }
    let mut buf = Vec::new();
    writeln!(buf, "{PLOTDATA_HEADER}").expect("write to memory");
    for (name, trace) in traces {
        if name.contains(',') || name.contains('"') {
            return Err(HarnessError::Config(format!("series name {name:?} must not contain commas or quotes")));
        }
        for r in &trace.records {
            writeln!(buf, "{},{},{}", r.t, name, r.avg_gap).expect("write to memory");
        }
    }
    fs::write(out, buf).map_err(|e| HarnessError::io(out, e))?;
    let script = out.with_extension("py");
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    fs::write(&script, SCRIPT_STUB.replace("{csv}", &name)).map_err(|e| HarnessError::io(&script, e))?;
    Ok(script)
}
