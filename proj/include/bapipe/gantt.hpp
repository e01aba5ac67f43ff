#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "bapipe/simulator.hpp"

namespace bapipe {

// CSV trace: stage,kind,micro_batch,start_us,end_us, sorted by (stage, start).
// Times print exactly (p/q for non-integral ticks).
inline std::string gantt_csv(const Timeline& t) {
    std::ostringstream out;
    out << "stage,kind,micro_batch,start_us,end_us\n";
    for (const Event& e : t.events)
        out << e.stage << ',' << to_string(e.kind) << ',' << e.micro_batch << ','
            << e.start.str() << ',' << e.end.str() << '\n';
    return out.str();
}

namespace gantt_detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline const char* color(EventKind k) {
    switch (k) {
        case EventKind::FP: return "#4e79a7";
        case EventKind::BP: return "#f28e2b";
        case EventKind::SEND_F:
        case EventKind::RECV_F: return "#76b7b2";
        default: return "#b07aa1";
    }
}

}  // namespace gantt_detail

// One swim lane per stage; FP/BP as full-height bars, communication as a
// thin strip under the lane. Output is deterministic for a given timeline.
inline std::string gantt_svg(const Timeline& t) {
    using gantt_detail::color;
    using gantt_detail::fmt;
    std::int64_t n_stages = 0;
    for (const Event& e : t.events) n_stages = std::max(n_stages, e.stage);
    const double width = 1000.0, label_w = 64.0, lane_h = 36.0, bar_h = 22.0,
                 comm_h = 6.0, top = 28.0;
    double span = std::max(t.makespan.to_double(), 1.0);
    double height = top + lane_h * (double)std::max<std::int64_t>(n_stages, 1) + 12.0;

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width + label_w + 16)
      << "\" height=\"" << fmt(height) << "\" font-family=\"monospace\" font-size=\"11\">\n";
    s << "<text x=\"4\" y=\"16\">makespan " << t.makespan.str() << " us, "
      << t.events.size() << " events</text>\n";
    for (std::int64_t st = 1; st <= n_stages; ++st) {
        double y = top + lane_h * (double)(st - 1);
        s << "<text x=\"4\" y=\"" << fmt(y + bar_h - 6) << "\">stage " << st << "</text>\n";
        s << "<line x1=\"" << fmt(label_w) << "\" y1=\"" << fmt(y + lane_h - 2)
          << "\" x2=\"" << fmt(label_w + width) << "\" y2=\"" << fmt(y + lane_h - 2)
          << "\" stroke=\"#ddd\"/>\n";
    }
    for (const Event& e : t.events) {
        bool comm = e.kind != EventKind::FP && e.kind != EventKind::BP;
        double x = label_w + width * e.start.to_double() / span;
        double w = width * (e.end - e.start).to_double() / span;
        double y = top + lane_h * (double)(e.stage - 1);
        if (comm) y += bar_h + 2.0;
        s << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
          << fmt(std::max(w, 0.5)) << "\" height=\"" << fmt(comm ? comm_h : bar_h)
          << "\" fill=\"" << color(e.kind) << "\" stroke=\"#333\" stroke-width=\"0.3\">"
          << "<title>" << to_string(e.kind) << " m" << e.micro_batch << " ["
          << e.start.str() << "," << e.end.str() << "]</title></rect>\n";
    }
    s << "</svg>\n";
    return s.str();
}

enum class GanttFormat { Csv, Svg };

inline std::string export_gantt(const Timeline& t, GanttFormat f) {
    return f == GanttFormat::Csv ? gantt_csv(t) : gantt_svg(t);
}

}  // namespace bapipe
