#include <istream>
#include <ostream>
#include <sstream>

#include "star/errors.hpp"
#include "star/trainer/trainer.hpp"

namespace star {

EvalReport make_report(const std::string& variant, const std::string& dataset, std::uint64_t seed,
                       const EvalResult& result) {
    return {variant, dataset, seed, result.ade, result.fde, result.samples, static_cast<int>(result.scenes.size()),
            result.targets};
}

void write_report_text(std::ostream& out, std::span<const EvalReport> reports) {
    for (const EvalReport& r : reports)
        out << r.variant << " on " << r.dataset << " (seed " << r.seed << ", K=" << r.samples << ", " << r.scenes
            << " scenes, " << r.targets << " pedestrians): ADE " << format_double(r.ade) << " FDE "
            << format_double(r.fde) << '\n';
}

void write_report_table(std::ostream& out, std::span<const EvalReport> reports) {
    out << "variant,dataset,seed,ADE,FDE,K\n";
    for (const EvalReport& r : reports)
        out << r.variant << ',' << r.dataset << ',' << r.seed << ',' << format_double(r.ade) << ','
            << format_double(r.fde) << ',' << r.samples << '\n';
}

std::vector<EvalReport> read_report_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "variant,dataset,seed,ADE,FDE,K")
        throw DataError("report table: missing header");
    std::vector<EvalReport> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 6) throw DataError("report table line " + std::to_string(line_no) + ": expected 6 fields");
        EvalReport r;
        r.variant = fields[0];
        r.dataset = fields[1];
        r.seed = static_cast<std::uint64_t>(parse_int("seed", fields[2]));
        r.ade = parse_double("ADE", fields[3]);
        r.fde = parse_double("FDE", fields[4]);
        r.samples = parse_int("K", fields[5]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_loss_curve(std::ostream& out, const TrainResult& result) {
    out << "step,epoch,loss\n";
    for (const StepRecord& s : result.steps) out << s.step << ',' << s.epoch << ',' << format_double(s.loss) << '\n';
}

} // namespace star
