//! Deterministic text output.

use std::path::Path;

/// Shortest representation that parses back to the same f64.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut buf = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&x| num(x)).collect();
        self.cells(&cells);
    }

    pub fn cells(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn comment(&mut self, text: &str) {
        self.buf.push_str("# ");
        self.buf.push_str(text);
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// A standalone matplotlib script that plots `ys` against `x` from the CSV
/// at `data`.
pub fn plot_script(data: &Path, x: &str, ys: &[&str], xlabel: &str, ylabel: &str) -> String {
    let ys = ys.iter().map(|y| format!("{y:?}")).collect::<Vec<_>>().join(", ");
    format!(
        "import numpy as np\n\
         import matplotlib.pyplot as plt\n\
         \n\
         d = np.genfromtxt({data:?}, delimiter=\",\", names=True, comments=\"#\")\n\
         fig, ax = plt.subplots()\n\
         for col in [{ys}]:\n    ax.plot(d[{x:?}], d[col], label=col)\n\
         ax.set_xlabel({xlabel:?})\n\
         ax.set_ylabel({ylabel:?})\n\
         ax.legend()\n\
         plt.show()\n",
        data = data.display().to_string(),
    )
}
