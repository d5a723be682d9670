#include "relunet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "relunet/csv.hpp"

namespace relunet {

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::GaussianTeacher: return "gaussian-teacher";
        case DatasetKind::Orthogonal: return "orthogonal";
        case DatasetKind::Assumption1: return "assumption1";
    }
    return "unknown";
}

DatasetKind parse_dataset_kind(const std::string& text) {
    if (text == "gaussian-teacher") return DatasetKind::GaussianTeacher;
    if (text == "orthogonal") return DatasetKind::Orthogonal;
    if (text == "assumption1") return DatasetKind::Assumption1;
    throw InvalidArgument("unknown dataset kind: " + text);
}

Vector teacher_direction(Eigen::Index d) {
    if (d < 3) throw InvalidArgument("teacher direction needs d >= 3");
    Vector v = Vector::Zero(d);
    v[0] = 4.0 / 5.0;
    v[2] = 3.0 / 5.0;
    return v;
}

Matrix assumption1_centers(Eigen::Index d) {
    if (d < 3) throw InvalidArgument("centers need d >= 3");
    Matrix c = Matrix::Zero(d, d);
    c(0, 0) = 1.0;
    c(1, 0) = 8.0 / 9.0;
    c(1, 1) = -4.0 / 9.0;
    c(1, 2) = 1.0 / 9.0;
    c(2, 0) = 8.0 / 9.0;
    c(2, 1) = 4.0 / 9.0;
    c(2, 2) = 1.0 / 9.0;
    for (Eigen::Index k = 3; k < d; ++k) {
        c(k, 0) = 8.0 / 9.0;
        c(k, k) = std::sqrt(17.0) / 9.0;
    }
    return c;
}

TeacherNetwork random_teacher(Eigen::Index width, Eigen::Index d, Rng& rng) {
    if (width < 1 || d < 1) throw InvalidArgument("teacher width and dimension must be positive");
    TeacherNetwork t = Network::zeros(width, d);
    for (Eigen::Index i = 0; i < width; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) t.W(i, j) = gaussian(rng);
        t.a[i] = gaussian(rng);
    }
    return t;
}

Dataset gen_gaussian_teacher(Eigen::Index n, Eigen::Index d, Eigen::Index teacher_width, std::uint64_t seed) {
    if (n < 1 || d < 1 || teacher_width < 1) throw InvalidArgument("gen_gaussian_teacher: n, d, width must be >= 1");
    Rng teacher_rng = make_rng(seed, {1});
    Rng point_rng = make_rng(seed, {2});
    const TeacherNetwork teacher = random_teacher(teacher_width, d, teacher_rng);
    Dataset ds;
    ds.kind = DatasetKind::GaussianTeacher;
    ds.seed = seed;
    ds.points.resize(n, d);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < d; ++j) ds.points(k, j) = gaussian(point_rng);
    ds.labels = teacher.outputs(ds.points);
    return ds;
}

Dataset gen_orthogonal(Eigen::Index n, Eigen::Index d, const TeacherNetwork& labeler, std::uint64_t seed) {
    if (n < 1 || d < 1) throw InvalidArgument("gen_orthogonal: n and d must be >= 1");
    if (n > d) throw InvalidArgument("gen_orthogonal: need n <= d for an orthonormal frame");
    if (labeler.dim() != d) throw InvalidArgument("gen_orthogonal: labeler dimension mismatch");
    Rng rng = make_rng(seed, {3});
    Matrix g(d, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < d; ++i) g(i, j) = gaussian(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, n);
    const Matrix& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    Dataset ds;
    ds.kind = DatasetKind::Orthogonal;
    ds.seed = seed;
    ds.points = q.transpose();
    ds.labels = labeler.outputs(ds.points);
    return ds;
}

Dataset gen_assumption1(Eigen::Index d, double eta, double noise_std, std::uint64_t seed) {
    if (d < 3) throw InvalidArgument("gen_assumption1: d must be >= 3");
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("gen_assumption1: eta must lie in (0, 1)");
    if (!(noise_std >= 0.0)) throw InvalidArgument("gen_assumption1: noise_std must be >= 0");
    const Matrix centers = assumption1_centers(d);
    const Vector vstar = teacher_direction(d);
    Rng rng = make_rng(seed, {4});

    Dataset ds;
    ds.kind = DatasetKind::Assumption1;
    ds.seed = seed;
    ds.eta = eta;
    ds.noise_std = noise_std;
    ds.points.resize(d, d);
    ds.labels.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const Vector center = centers.row(k).transpose();
        bool accepted = false;
        for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
            Vector x = center;
            if (noise_std > 0.0) {
                for (Eigen::Index j = 0; j < d; ++j) x[j] += noise_std * gaussian(rng);
                x /= x.norm();
            }
            if (x.dot(center) > 1.0 - eta) {
                ds.points.row(k) = x.transpose();
                accepted = true;
            }
        }
        if (!accepted)
            throw NumericalError("gen_assumption1: 100 draws failed x_k . xhat_k > 1 - eta for k = " +
                                 std::to_string(k + 1));
        ds.labels[k] = vstar.dot(ds.point(k));
    }
    return ds;
}

CovarianceSpectrum covariance_spectrum(const Dataset& ds) {
    if (ds.n() == 0) throw InvalidArgument("covariance_spectrum: empty dataset");
    CovarianceSpectrum s;
    s.H = ds.points.transpose() * ds.points / static_cast<double>(ds.n());
    s.H = 0.5 * (s.H + s.H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s.H);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance_spectrum: eigendecomposition failed");
    s.eigenvalues = eig.eigenvalues();
    s.eigenvectors = eig.eigenvectors();
    s.mu_max = s.eigenvalues.maxCoeff();
    const double floor = 1e-13 * std::max(1.0, std::abs(s.mu_max));
    for (Eigen::Index j = 0; j < s.eigenvalues.size(); ++j)
        if (std::abs(s.eigenvalues[j]) <= floor) s.eigenvalues[j] = 0.0;
    s.mu_min = s.eigenvalues.minCoeff();

    s.eigen_distinct = s.mu_min > 0.0;
    for (Eigen::Index j = 1; j < s.eigenvalues.size(); ++j)
        if (s.eigenvalues[j] - s.eigenvalues[j - 1] <= 1e-10) s.eigen_distinct = false;

    if (ds.kind == DatasetKind::Assumption1 && ds.d() >= 3) {
        const Vector coeff = s.eigenvectors.transpose() * teacher_direction(ds.d());
        s.vstar_full_support = s.mu_min > 0.0 && (coeff.array().abs() > 1e-10).all();
    }
    return s;
}

namespace {

double normalized_abs_det(const Matrix& pts, const std::vector<Eigen::Index>& rows) {
    const auto d = pts.cols();
    Matrix sub(d, d);
    double scale = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        sub.row(j) = pts.row(rows[static_cast<std::size_t>(j)]);
        scale *= sub.row(j).norm();
    }
    if (scale == 0.0) return 0.0;
    return std::abs(sub.partialPivLu().determinant()) / scale;
}

bool next_combination(std::vector<Eigen::Index>& c, Eigen::Index n) {
    const auto k = static_cast<Eigen::Index>(c.size());
    for (Eigen::Index i = k - 1; i >= 0; --i) {
        auto& ci = c[static_cast<std::size_t>(i)];
        if (ci < n - k + i) {
            ++ci;
            for (Eigen::Index j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

GeneralPositionReport validate_general_position(const Dataset& ds, std::uint64_t sample_seed) {
    constexpr double det_tol = 1e-12;
    GeneralPositionReport rep;
    const auto n = ds.n();
    const auto d = ds.d();
    for (Eigen::Index k = 0; k < n; ++k)
        if (ds.points.row(k).norm() == 0.0) rep.has_zero_point = true;

    if (n < d) {
        // Fewer points than dimensions: general position means linear independence.
        Matrix normalized = ds.points;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double nk = normalized.row(k).norm();
            if (nk > 0.0) normalized.row(k) /= nk;
        }
        Eigen::JacobiSVD<Matrix> svd(normalized);
        rep.min_abs_det = n > 0 ? svd.singularValues().minCoeff() : 1.0;
        rep.exhaustive = true;
        rep.subsets_checked = 1;
        rep.general_position = !rep.has_zero_point && rep.min_abs_det > det_tol;
        return rep;
    }

    rep.min_abs_det = std::numeric_limits<double>::infinity();
    if (n <= 16) {
        rep.exhaustive = true;
        std::vector<Eigen::Index> c(static_cast<std::size_t>(d));
        std::iota(c.begin(), c.end(), Eigen::Index{0});
        do {
            rep.min_abs_det = std::min(rep.min_abs_det, normalized_abs_det(ds.points, c));
            ++rep.subsets_checked;
        } while (next_combination(c, n));
    } else {
        Rng rng = make_rng(sample_seed, {5});
        std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        for (int s = 0; s < 20000; ++s) {
            std::shuffle(all.begin(), all.end(), rng);
            std::vector<Eigen::Index> c(all.begin(), all.begin() + d);
            rep.min_abs_det = std::min(rep.min_abs_det, normalized_abs_det(ds.points, c));
            ++rep.subsets_checked;
        }
    }
    rep.general_position = !rep.has_zero_point && rep.min_abs_det > det_tol;
    return rep;
}

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    out << "#kind=" << to_string(ds.kind) << ",seed=" << ds.seed << ",eta=" << csv::format(ds.eta)
        << ",noise_std=" << csv::format(ds.noise_std) << '\n';
    out << 'k';
    for (Eigen::Index j = 0; j < ds.d(); ++j) out << ",x_" << (j + 1);
    out << ",y\n";
    for (Eigen::Index k = 0; k < ds.n(); ++k) {
        out << (k + 1);
        for (Eigen::Index j = 0; j < ds.d(); ++j) out << ',' << csv::format(ds.points(k, j));
        out << ',' << csv::format(ds.labels[k]) << '\n';
    }
}

void write_dataset_csv(const std::string& path, const Dataset& ds) {
    auto out = csv::open_output(path);
    write_dataset_csv(out, ds);
}

Dataset read_dataset_csv(std::istream& in) {
    Dataset ds;
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            for (const auto& field : csv::split(line.substr(1))) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = field.substr(0, eq);
                const std::string value = field.substr(eq + 1);
                if (key == "kind") ds.kind = parse_dataset_kind(value);
                else if (key == "seed") ds.seed = std::stoull(value);
                else if (key == "eta") ds.eta = csv::parse_double(value);
                else if (key == "noise_std") ds.noise_std = csv::parse_double(value);
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = csv::split(line);
        if (fields.size() < 3) throw InvalidArgument("dataset csv: row needs k, at least one coordinate and y");
        std::vector<double> row;
        for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(csv::parse_double(fields[j]));
        if (!rows.empty() && row.size() != rows.front().size())
            throw InvalidArgument("dataset csv: inconsistent row length");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument("dataset csv: no data rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.front().size()) - 1;
    ds.points.resize(n, d);
    ds.labels.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        for (Eigen::Index j = 0; j < d; ++j) ds.points(k, j) = r[static_cast<std::size_t>(j)];
        ds.labels[k] = r.back();
    }
    return ds;
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open dataset: " + path);
    return read_dataset_csv(in);
}

}  // namespace relunet
