use std::fmt;
use std::str::FromStr;

/// Energy carriers a bus, port or flow can belong to. Flows only ever
/// connect ports of the same carrier; converters are the sole bridge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Carrier {
    Electricity,
    Heat,
    Cooling,
    Gas,
    Hydrogen,
}

impl Carrier {
    pub const ALL: [Carrier; 5] = [
        Carrier::Electricity,
        Carrier::Heat,
        Carrier::Cooling,
        Carrier::Gas,
        Carrier::Hydrogen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Carrier::Electricity => "electricity",
            Carrier::Heat => "heat",
            Carrier::Cooling => "cooling",
            Carrier::Gas => "gas",
            Carrier::Hydrogen => "hydrogen",
        }
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCarrier(pub String);

impl fmt::Display for UnknownCarrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown energy carrier `{}`", self.0)
    }
}

impl std::error::Error for UnknownCarrier {}

impl FromStr for Carrier {
    type Err = UnknownCarrier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Carrier::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownCarrier(s.to_string()))
    }
}
