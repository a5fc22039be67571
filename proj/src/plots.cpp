#include "sslab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace sslab {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else if (ch == '"') out += "&quot;";
    else out += ch;
  }
  return out;
}

struct Range {
  double lo, hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

// One axes box at (x0, y0) of size w x h.
class Panel {
 public:
  Panel(double x0, double y0, double w, double h, Range xr, Range yr) : x0_(x0), y0_(y0), w_(w), h_(h), xr_(xr), yr_(yr) {}

  double px(double x) const { return x0_ + (x - xr_.lo) / (xr_.hi - xr_.lo) * w_; }
  double py(double y) const { return y0_ + h_ - (y - yr_.lo) / (yr_.hi - yr_.lo) * h_; }

  void frame(std::ostringstream& os, const std::string& title, const std::string& xl, const std::string& yl) const {
    os << "<rect x=\"" << num(x0_) << "\" y=\"" << num(y0_) << "\" width=\"" << num(w_) << "\" height=\"" << num(h_)
       << "\" fill=\"none\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << num(x0_ + w_ / 2) << "\" y=\"" << num(y0_ - 6)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(title) << "</text>\n";
    os << "<text x=\"" << num(x0_ + w_ / 2) << "\" y=\"" << num(y0_ + h_ + 28)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(xl) << "</text>\n";
    os << "<text x=\"" << num(x0_ - 34) << "\" y=\"" << num(y0_ + h_ / 2) << "\" text-anchor=\"middle\" font-size=\"10\" "
       << "transform=\"rotate(-90 " << num(x0_ - 34) << ' ' << num(y0_ + h_ / 2) << ")\">" << escape(yl) << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = xr_.lo + (xr_.hi - xr_.lo) * k / 4.0, yv = yr_.lo + (yr_.hi - yr_.lo) * k / 4.0;
      os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(y0_ + h_ + 12)
         << "\" text-anchor=\"middle\" font-size=\"8\">" << num(xv) << "</text>\n";
      os << "<text x=\"" << num(x0_ - 3) << "\" y=\"" << num(py(yv) + 3) << "\" text-anchor=\"end\" font-size=\"8\">"
         << num(yv) << "</text>\n";
    }
  }

  void polyline(std::ostringstream& os, std::span<const double> xs, std::span<const double> ys,
                const std::string& color) const {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << num(px(xs[i])) << ',' << num(py(ys[i]));
    os << "\"/>\n";
  }

  void vline(std::ostringstream& os, double x) const {
    os << "<line class=\"best-epoch\" x1=\"" << num(px(x)) << "\" y1=\"" << num(y0_) << "\" x2=\"" << num(px(x))
       << "\" y2=\"" << num(y0_ + h_) << "\" stroke=\"#888\" stroke-dasharray=\"4,3\"/>\n";
  }

 private:
  double x0_, y0_, w_, h_;
  Range xr_, yr_;
};

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " +
         num(w) + ' ' + num(h) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string training_curves_svg(std::span<const EpochRecord> records, std::size_t best_epoch,
                                const std::string& title) {
  struct Metric {
    const char* name;
    std::function<double(const EpochRecord&)> train, val;
  };
  const Metric metrics[] = {
      {"accuracy", [](const EpochRecord& r) { return r.train_acc; }, [](const EpochRecord& r) { return r.val_acc; }},
      {"BCE", [](const EpochRecord& r) { return r.train_bce; }, [](const EpochRecord& r) { return r.val_bce; }},
      {"AUC", [](const EpochRecord& r) { return r.train_auc; }, [](const EpochRecord& r) { return r.val_auc; }},
  };
  const double pw = 240, ph = 160, W = 3 * (pw + 70) + 20, H = 2 * (ph + 70) + 40;
  std::ostringstream os;
  os << header(W, H);
  os << "<text x=\"" << num(W / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  std::vector<double> xs;
  for (const auto& r : records) xs.push_back(static_cast<double>(r.epoch));
  const Range xr = xs.empty() ? Range{0, 1} : padded(xs.front(), xs.back());
  for (int row = 0; row < 2; ++row)
    for (int col = 0; col < 3; ++col) {
      const auto& m = metrics[col];
      std::vector<double> ys;
      for (const auto& r : records) ys.push_back(row == 0 ? m.train(r) : m.val(r));
      const auto [lo, hi] = ys.empty() ? std::pair{0.0, 1.0} : std::pair{*std::min_element(ys.begin(), ys.end()),
                                                                         *std::max_element(ys.begin(), ys.end())};
      const Panel p(60 + col * (pw + 70), 50 + row * (ph + 70), pw, ph, xr, padded(lo, hi));
      p.frame(os, std::string(row == 0 ? "train " : "val ") + m.name, "epoch", m.name);
      p.polyline(os, xs, ys, row == 0 ? "#1f77b4" : "#d62728");
      if (best_epoch > 0) p.vline(os, static_cast<double>(best_epoch));
    }
  os << "</svg>\n";
  return os.str();
}

std::string scatter_svg(std::span<const ScatterPoint> points, const std::string& x_label, const std::string& y_label,
                        const std::string& title) {
  double lo = 1.0, hi = 0.0;
  std::size_t nmax = 1;
  for (const auto& p : points) {
    lo = std::min({lo, p.x, p.y});
    hi = std::max({hi, p.x, p.y});
    nmax = std::max(nmax, p.n);
  }
  if (points.empty()) lo = 0.0, hi = 1.0;
  const Range r = padded(lo, hi);
  const double W = 460, H = 420;
  const Panel panel(70, 40, 340, 320, r, r);
  std::ostringstream os;
  os << header(W, H);
  panel.frame(os, title, x_label, y_label);
  os << "<line x1=\"" << num(panel.px(r.lo)) << "\" y1=\"" << num(panel.py(r.lo)) << "\" x2=\"" << num(panel.px(r.hi))
     << "\" y2=\"" << num(panel.py(r.hi)) << "\" stroke=\"#bbb\" stroke-dasharray=\"2,2\"/>\n";
  for (const auto& p : points) {
    const double radius = 3.0 + 12.0 * std::sqrt(static_cast<double>(p.n) / static_cast<double>(nmax));
    os << "<circle cx=\"" << num(panel.px(p.x)) << "\" cy=\"" << num(panel.py(p.y)) << "\" r=\"" << num(radius)
       << "\" fill=\"#1f77b4\" fill-opacity=\"0.5\" stroke=\"#1f77b4\" data-n=\"" << p.n << "\"><title>"
       << escape(p.label) << "</title></circle>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string sweep_svg(std::span<const SweepPoint> points, const std::string& title) {
  double lo = 1.0, hi = 0.0, smax = 1.0;
  for (const auto& p : points) {
    lo = std::min(lo, p.ci_lo);
    hi = std::max(hi, p.ci_hi);
    smax = std::max(smax, static_cast<double>(p.size));
  }
  if (points.empty()) lo = 0.0, hi = 1.0;
  const Panel panel(70, 40, 340, 260, padded(1.0, smax), padded(lo, hi));
  std::ostringstream os;
  os << header(460, 350);
  panel.frame(os, title, "ensemble size", "test AUC");
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    xs.push_back(static_cast<double>(p.size));
    ys.push_back(p.mean);
    os << "<line x1=\"" << num(panel.px(xs.back())) << "\" y1=\"" << num(panel.py(p.ci_lo)) << "\" x2=\""
       << num(panel.px(xs.back())) << "\" y2=\"" << num(panel.py(p.ci_hi)) << "\" stroke=\"#ff7f0e\"/>\n";
  }
  panel.polyline(os, xs, ys, "#ff7f0e");
  os << "</svg>\n";
  return os.str();
}

}  // namespace sslab
