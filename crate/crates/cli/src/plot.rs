//! gnuplot script for the angle, control and `V2` time series of a trace.

use prnn_abc::qp::Bounds;

/// 1-based trace columns used by the script.
const T: usize = 1;
const X1: usize = 2;
const X1D: usize = 4;
const U: usize = 7;
const V2: usize = 13;

pub fn script(trace_file: &str, bounds: Bounds) -> String {
    format!(
        "\
set datafile separator ','
set terminal pngcairo size 900,900
set output 'trace.png'
set multiplot layout 3,1
set grid
set xlabel 't [s]'

set ylabel 'angle [rad]'
plot '{trace_file}' using {T}:{X1} every ::1 with lines title 'x1', \\
     '' using {T}:{X1D} every ::1 with lines dt 2 title 'x1d'

set ylabel 'u [N]'
plot '{trace_file}' using {T}:{U} every ::1 with lines title 'u', \\
     {max} with lines dt 3 lc 'gray' title 'bounds', \\
     {min} with lines dt 3 lc 'gray' notitle

set ylabel 'V2'
set logscale y
plot '{trace_file}' using {T}:{V2} every ::1 with lines title 'V2'
unset logscale y

unset multiplot
",
        max = bounds.max,
        min = bounds.min,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use prnn_abc::trace::COLUMNS;

    #[test]
    fn columns_match_trace_layout() {
        assert_eq!(COLUMNS[T - 1], "t");
        assert_eq!(COLUMNS[X1 - 1], "x1");
        assert_eq!(COLUMNS[X1D - 1], "x1d");
        assert_eq!(COLUMNS[U - 1], "u");
        assert_eq!(COLUMNS[V2 - 1], "V2");
    }

    #[test]
    fn script_names_the_trace() {
        let s = script("trace.csv", Bounds::symmetric(2.0));
        assert!(s.contains("plot 'trace.csv' using 1:2"));
        assert!(s.contains("-2 with lines"));
    }
}
