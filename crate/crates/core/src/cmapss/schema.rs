/// Metadata for one of the 26 raw data columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSchema {
    pub original_label: &'static str,
    pub new_label: &'static str,
    pub sensor_name: &'static str,
    pub units: &'static str,
    pub description: &'static str,
}

const fn col(
    original_label: &'static str,
    new_label: &'static str,
    sensor_name: &'static str,
    units: &'static str,
    description: &'static str,
) -> ColumnSchema {
    ColumnSchema {
        original_label,
        new_label,
        sensor_name,
        units,
        description,
    }
}

pub const COLUMN_COUNT: usize = 26;
pub const SETTING_COUNT: usize = 3;
pub const SENSOR_COUNT: usize = 21;
/// Operational settings followed by sensors.
pub const SIGNAL_COUNT: usize = SETTING_COUNT + SENSOR_COUNT;

static SCHEMA: [ColumnSchema; COLUMN_COUNT] = [
    col("unit", "unit", "unit", "-", "Engine unit number"),
    col("cycle", "cycle", "cycle", "cycles", "Operational cycle"),
    col(
        "OS1",
        "mach",
        "OS1",
        "-",
        "Operational setting 1 (Mach number)",
    ),
    col(
        "OS2",
        "altitude",
        "OS2",
        "ft",
        "Operational setting 2 (altitude)",
    ),
    col(
        "OS3",
        "sea level temp",
        "OS3",
        "F",
        "Operational setting 3 (sea-level temperature)",
    ),
    col("SM1", "fan in temp", "T2", "R", "Total temp at fan inlet"),
    col(
        "SM2",
        "lpc out temp",
        "T24",
        "R",
        "Total temp at LPC outlet",
    ),
    col(
        "SM3",
        "hpc out temp",
        "T30",
        "R",
        "Total temp at HPC outlet",
    ),
    col(
        "SM4",
        "lpt out temp",
        "T50",
        "R",
        "Total temp at LPT outlet",
    ),
    col("SM5", "fan in press", "P2", "psia", "Pressure at fan inlet"),
    col(
        "SM6",
        "bypass press",
        "P15",
        "psia",
        "Total pressure in bypass duct",
    ),
    col(
        "SM7",
        "hpc out press",
        "P30",
        "psia",
        "Total pressure at HPC outlet",
    ),
    col("SM8", "fan speed", "Nf", "rpm", "Physical fan speed"),
    col("SM9", "core speed", "Nc", "rpm", "Physical core speed"),
    col(
        "SM10",
        "epr",
        "epr",
        "N/A",
        "Engine pressure ratio (P50/P2)",
    ),
    col(
        "SM11",
        "hpc stat press",
        "Ps30",
        "psia",
        "Static pressure at HPC outlet",
    ),
    col(
        "SM12",
        "flow press ratio",
        "Phi",
        "pps/psi",
        "Ratio of fuel flow to Ps30",
    ),
    col(
        "SM13",
        "corr fan speed",
        "NRf",
        "rpm",
        "Corrected fan speed",
    ),
    col(
        "SM14",
        "corr core speed",
        "NRc",
        "rpm",
        "Corrected core speed",
    ),
    col("SM15", "bypass ratio", "BPR", "N/A", "Bypass ratio"),
    col(
        "SM16",
        "burner fuel ratio",
        "farB",
        "N/A",
        "Burner fuel-air ratio",
    ),
    col("SM17", "bleed enthalpy", "htBleed", "N/A", "Bleed enthalpy"),
    col(
        "SM18",
        "dmd fan speed",
        "Nf dmd",
        "rpm",
        "Demanded fan speed",
    ),
    col(
        "SM19",
        "dmd corr fan speed",
        "PCNfR dmd",
        "rpm",
        "Demanded corrected fan speed",
    ),
    col("SM20", "hpt bleed", "WC31", "lbm/s", "HPT coolant bleed"),
    col("SM21", "lpt bleed", "WC32", "lbm/s", "LPT coolant bleed"),
];

/// All 26 columns in file order.
pub fn column_schema() -> &'static [ColumnSchema] {
    &SCHEMA
}

/// Positional labels of the 24 signal columns: OS1..OS3, SM1..SM21.
pub fn signal_labels() -> Vec<String> {
    SCHEMA[2..]
        .iter()
        .map(|c| c.original_label.to_string())
        .collect()
}

/// Signal index (0-based into OS1..SM21) for a label such as `"SM7"` or `"OS2"`.
pub fn signal_index(label: &str) -> Option<usize> {
    SCHEMA[2..]
        .iter()
        .position(|c| c.original_label.eq_ignore_ascii_case(label))
}

/// Signal index of sensor `SMn` (1-based sensor number).
pub fn sensor_index(n: usize) -> usize {
    assert!(
        (1..=SENSOR_COUNT).contains(&n),
        "sensor number out of range"
    );
    SETTING_COUNT + n - 1
}
