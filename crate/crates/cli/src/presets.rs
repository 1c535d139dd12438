//! Named parameter sets, shipped as TOML documents.

const THEORY_LEVELS: &str = r#"[levels]
delta23 = "5 gamma"
delta34 = "10 gamma"
gammas = ["1 gamma", "1 gamma", "1 gamma"]
"#;

const THEORY_SCAN: &str = r#"[scan]
dp_min = "-30 gamma"
dp_max = "20 gamma"
points = 5001
"#;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "fig2", summary: "same as fig2a" },
    Preset { name: "fig2a", summary: "kappa=2, delta23=5, delta34=10, delta_c=0; gN 4.3 (also run 3.3, 2.3) [gamma]" },
    Preset { name: "fig2b", summary: "as fig2a with delta_c=-5 [gamma]" },
    Preset { name: "fig2c", summary: "as fig2a with delta_c=-10 [gamma]" },
    Preset { name: "fig2d", summary: "as fig2a with delta_c=-12.5 [gamma]" },
    Preset { name: "fig3", summary: "gN=10, kappa=2, delta23=5, delta34=10; delta_c scan -40..20 [gamma]" },
    Preset { name: "fig6", summary: "gN=4.5, delta_c=0, kappa=2, delta23=5, delta34=10 [gamma]" },
    Preset { name: "rb85-d2", summary: "85Rb D2 F=2 -> F'=1,2,3: kappa=10, delta23=31.7, delta34=60.3, delta_c=0; gN required [MHz]" },
    Preset { name: "rb85-d2-a", summary: "rb85-d2 without atoms (gN=0)" },
    Preset { name: "rb85-d2-b", summary: "rb85-d2 with delta_c=0; gN required" },
    Preset { name: "rb85-d2-c", summary: "rb85-d2 with delta_c=-31.7 MHz; gN required" },
    Preset { name: "rb85-d2-d", summary: "rb85-d2 with delta_c=-78.1 MHz; gN required" },
];

fn theory(title: &str, g: &str, delta_c: &str, extra: &str) -> String {
    format!(
        "# {title}\n[units]\ndisplay = \"gamma\"\n\n{THEORY_LEVELS}\n[coupling]\ng_sqrt_n = \"{g} gamma\"\n\n\
         [cavity]\nkappa = \"2 gamma\"\ndelta_c = \"{delta_c} gamma\"\n\n{THEORY_SCAN}{extra}"
    )
}

fn rb85(title: &str, delta_c: &str, g: Option<&str>) -> String {
    let coupling = match g {
        Some(g) => format!("[coupling]\ng_sqrt_n = \"{g} MHz\"\n"),
        None => "# [coupling] g_sqrt_n has no default: pass --gN, e.g. --gN 30 (MHz)\n".to_string(),
    };
    format!(
        "# {title}\n\
         # Gamma is the 85Rb D2 natural linewidth, 6.0666 MHz; change gamma_mhz to recalibrate.\n\
         # kappa is the cavity half width at half maximum (full width 2 kappa).\n\
         [units]\ngamma_mhz = 6.0666\ndisplay = \"MHz\"\n\n\
         [levels]\ndelta23 = \"31.7 MHz\"\ndelta34 = \"60.3 MHz\"\ngammas = [\"1 gamma\", \"1 gamma\", \"1 gamma\"]\n\n\
         {coupling}\n\
         [cavity]\nkappa = \"10 MHz\"\ndelta_c = \"{delta_c} MHz\"\n\n\
         [scan]\ndp_min = \"-200 MHz\"\ndp_max = \"100 MHz\"\npoints = 6001\n\n\
         [branches]\ndc_min = \"-150 MHz\"\ndc_max = \"50 MHz\"\npoints = 601\n"
    )
}

/// TOML text of preset `name`.
pub fn preset_text(name: &str) -> Option<String> {
    let branches = "\n[branches]\ndc_min = \"-40 gamma\"\ndc_max = \"20 gamma\"\npoints = 601\n";
    let text = match name {
        "fig2" | "fig2a" => theory("four-level spectrum, cavity on the |1>->|4> line", "4.3", "0", ""),
        "fig2b" => theory("four-level spectrum, cavity midway between |3> and |4>", "4.3", "-5", ""),
        "fig2c" => theory("four-level spectrum, cavity on the |1>->|3> line", "4.3", "-10", ""),
        "fig2d" => theory("four-level spectrum, cavity midway between |2> and |3>", "4.3", "-12.5", ""),
        "fig3" => theory("polariton branches versus cavity detuning (delta = 2.5)", "10", "0", branches),
        "fig6" => theory("susceptibility of the four-level medium", "4.5", "0", ""),
        "rb85-d2" | "rb85-d2-b" => rb85("85Rb D2, cavity on F=2 -> F'=3", "0", None),
        "rb85-d2-a" => rb85("85Rb D2, empty cavity", "0", Some("0")),
        "rb85-d2-c" => rb85("85Rb D2, cavity midway between F'=2 and F'=3", "-31.7", None),
        "rb85-d2-d" => rb85(
            "85Rb D2, cavity far below F'=3. -71.8 MHz and the F'=1/F'=2 midpoint\n\
             # (-76.15 MHz) are other candidate detunings for this setting.",
            "-78.1",
            None,
        ),
        _ => return None,
    };
    Some(text)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
