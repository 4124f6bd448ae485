//! Star-schema table and column names plus the value domains the generator draws from.

pub const LINEORDER: &str = "lineorder";
pub const DATE: &str = "date";
pub const CUSTOMER: &str = "customer";
pub const SUPPLIER: &str = "supplier";
pub const PART: &str = "part";

/// Fact-table rows per unit of scale factor.
pub const LINEORDER_ROWS_PER_SF: f64 = 6_000_000.0;
pub const CUSTOMER_ROWS_PER_SF: f64 = 30_000.0;
pub const SUPPLIER_ROWS_PER_SF: f64 = 2_000.0;
pub const PART_ROWS_BASE: f64 = 200_000.0;
/// 1992-01-01 through 1998-12-30.
pub const DATE_ROWS: usize = 2556;

/// The LINEORDER integer columns that get compressed. The remaining integer
/// columns stay raw, like the byte columns.
pub const COMPRESSED_COLUMNS: [&str; 10] = [
    "lo_orderkey",
    "lo_custkey",
    "lo_partkey",
    "lo_suppkey",
    "lo_orderdate",
    "lo_quantity",
    "lo_extendedprice",
    "lo_discount",
    "lo_revenue",
    "lo_supplycost",
];

pub const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];

/// Nation name and index into [`REGIONS`].
pub const NATIONS: [(&str, usize); 25] = [
    ("ALGERIA", 0),
    ("ARGENTINA", 1),
    ("BRAZIL", 1),
    ("CANADA", 1),
    ("EGYPT", 4),
    ("ETHIOPIA", 0),
    ("FRANCE", 3),
    ("GERMANY", 3),
    ("INDIA", 2),
    ("INDONESIA", 2),
    ("IRAN", 4),
    ("IRAQ", 4),
    ("JAPAN", 2),
    ("JORDAN", 4),
    ("KENYA", 0),
    ("MOROCCO", 0),
    ("MOZAMBIQUE", 0),
    ("PERU", 1),
    ("CHINA", 2),
    ("ROMANIA", 3),
    ("SAUDI ARABIA", 4),
    ("VIETNAM", 2),
    ("RUSSIA", 3),
    ("UNITED KINGDOM", 3),
    ("UNITED STATES", 1),
];

pub const MARKET_SEGMENTS: [&str; 5] = ["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"];
pub const ORDER_PRIORITIES: [&str; 5] = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECI", "5-LOW"];
pub const SHIP_MODES: [&str; 7] = ["REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"];
pub const COLORS: [&str; 16] = [
    "almond",
    "antique",
    "aquamarine",
    "azure",
    "beige",
    "bisque",
    "black",
    "blanched",
    "blue",
    "blush",
    "brown",
    "burlywood",
    "burnished",
    "chartreuse",
    "chiffon",
    "chocolate",
];
pub const TYPE_SYLLABLES: [[&str; 5]; 3] = [
    ["STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY"],
    ["ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED"],
    ["TIN", "NICKEL", "BRASS", "STEEL", "COPPER"],
];
pub const CONTAINER_SYLLABLES: [[&str; 8]; 2] = [
    ["SM", "LG", "MED", "JUMBO", "WRAP", "SM", "LG", "MED"],
    ["CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM"],
];

/// City names are the nation padded or cut to nine characters plus a digit.
pub fn city(nation: &str, digit: u32) -> String {
    format!("{:<9.9}{digit}", nation)
}

/// Part retail price in cents, a pure function of the key.
pub fn retail_price(partkey: u32) -> u32 {
    90_000 + (partkey / 10) % 20_001 + 100 * (partkey % 1000)
}

/// Row counts for a scale factor. Dimension tables keep at least one row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cardinalities {
    pub lineorder: usize,
    pub customer: usize,
    pub supplier: usize,
    pub part: usize,
    pub date: usize,
}

impl Cardinalities {
    pub fn for_scale(sf: f64) -> Cardinalities {
        let dim = |per_sf: f64| ((per_sf * sf).round() as usize).max(1);
        let part = if sf >= 1.0 { (PART_ROWS_BASE * (1.0 + sf.log2())).floor() as usize } else { dim(PART_ROWS_BASE) };
        Cardinalities {
            lineorder: (LINEORDER_ROWS_PER_SF * sf).round() as usize,
            customer: dim(CUSTOMER_ROWS_PER_SF),
            supplier: dim(SUPPLIER_ROWS_PER_SF),
            part,
            date: DATE_ROWS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cities_are_ten_characters() {
        assert_eq!(city("UNITED KINGDOM", 1), "UNITED KI1");
        assert_eq!(city("PERU", 0), "PERU     0");
    }

    #[test]
    fn row_counts() {
        let c = Cardinalities::for_scale(0.01);
        assert_eq!(c.lineorder, 60_000);
        assert_eq!((c.customer, c.supplier, c.part, c.date), (300, 20, 2000, 2556));
        let one = Cardinalities::for_scale(1.0);
        assert_eq!((one.lineorder, one.part), (6_000_000, 200_000));
        assert_eq!(Cardinalities::for_scale(1e-9).supplier, 1);
    }
}
