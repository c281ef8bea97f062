#include "curvcone/io.hpp"

namespace curvcone {

json to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const CurvatureOperator& r) {
    json flat = json::array();
    for (int i = 0; i < r.dim(); ++i)
        for (int j = 0; j < r.dim(); ++j) flat.push_back(r.mat()(i, j));
    return json{{"n", r.n()}, {"mat", flat}};
}

CurvatureOperator operator_from_json(const json& j) {
    if (!j.is_object() || !j.contains("n") || !j.contains("mat")) throw InputError("operator JSON needs keys n and mat");
    int n = j.at("n").get<int>();
    if (n < 2 || n > kMaxDim) throw InputError("operator JSON: n out of range");
    int N = biv_count(n);
    const json& flat = j.at("mat");
    if (!flat.is_array() || static_cast<int>(flat.size()) != N * N) throw InputError("operator JSON: mat must have N*N entries");
    Mat m(N, N);
    for (int i = 0; i < N; ++i)
        for (int k = 0; k < N; ++k) m(i, k) = flat.at(i * N + k).get<double>();
    return CurvatureOperator(n, m);
}

}  // namespace curvcone
