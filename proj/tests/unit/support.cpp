#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace allocbench::oracle {

Eigen::MatrixXd random_spd(std::size_t n, std::mt19937_64& rng, double floor) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
  }
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(n);
  s.diagonal().array() += floor;
  return s;
}

market::PriceFrame frame_from_prices(const Eigen::MatrixXd& prices) {
  using namespace std::chrono;
  std::vector<market::Date> dates;
  sys_days day = sys_days{year{2020} / January / 6};
  while (dates.size() < static_cast<std::size_t>(prices.rows())) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) dates.emplace_back(day);
    day += days{1};
  }
  std::vector<std::string> tickers;
  for (Eigen::Index i = 0; i < prices.cols(); ++i) tickers.push_back("A" + std::to_string(i));
  return market::PriceFrame(std::move(dates), std::move(tickers), prices);
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("allocbench_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}


bool gradient_close(double analytic, double numeric, double rel, double abs) {
  const double err = std::abs(analytic - numeric);
  return err <= abs || err <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

GradientReport check_mlp_gradient(const neuro::Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  double h, double rel, double abs) {
  using namespace neuro;
  Tape tape;
  Mlp::Binding binding;
  const Var out = net.forward(tape, tape.constant(x), &binding);
  const Var loss = scale(sum(square(sub(out, tape.constant(y)))), 0.5);
  tape.backward(loss);
  const Eigen::VectorXd analytic = net.gradient(tape, binding);

  const auto value = [&](const Mlp& m) { return 0.5 * (m.forward_batch(x) - y).squaredNorm(); };
  Mlp probe = net;
  GradientReport report;
  for (Eigen::Index k = 0; k < probe.params().size(); ++k) {
    const double saved = probe.params()(k);
    probe.params()(k) = saved + h;
    const double up = value(probe);
    probe.params()(k) = saved - h;
    const double down = value(probe);
    probe.params()(k) = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic(k) - numeric);
    report.worst_abs = std::max(report.worst_abs, err);
    const double scale_ = std::max(std::abs(analytic(k)), std::abs(numeric));
    if (scale_ > 0.0 && err > abs) report.worst_rel = std::max(report.worst_rel, err / scale_);
    if (!gradient_close(analytic(k), numeric, rel, abs)) ++report.failures;
    ++report.checked;
  }
  return report;
}


Eigen::VectorXd naive_forward(const neuro::Mlp& net, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  std::size_t offset = 0;
  const auto& s = net.sizes();
  const auto& p = net.params();
  for (std::size_t l = 0; l + 1 < s.size(); ++l) {
    const std::size_t in = s[l];
    const std::size_t out = s[l + 1];
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = p(static_cast<Eigen::Index>(offset + in * out + o));
      for (std::size_t i = 0; i < in; ++i) acc += p(static_cast<Eigen::Index>(offset + i * out + o)) * a[i];
      if (l + 2 < s.size()) acc = net.activation() == neuro::Activation::Tanh ? std::tanh(acc) : std::max(acc, 0.0);
      z[o] = acc;
    }
    offset += (in + 1) * out;
    a = std::move(z);
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

Eigen::VectorXd naive_softmax(const Eigen::VectorXd& z) {
  double m = z(0);
  for (Eigen::Index i = 1; i < z.size(); ++i) m = std::max(m, z(i));
  Eigen::VectorXd e(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += e(i) = std::exp(z(i) - m);
  return e / total;
}

double naive_q(const neuro::Mlp& critic, const Eigen::VectorXd& obs, const Eigen::VectorXd& raw_action) {
  Eigen::VectorXd in(obs.size() + raw_action.size());
  in << obs, naive_softmax(raw_action);
  return naive_forward(critic, in)(0);
}

}  // namespace allocbench::oracle
