// Runs the CLI pipeline end to end and prints one PASS/FAIL line per acceptance criterion.
// Usage: acceptance <path to vardyn CLI> <scratch dir>
// Exit 0 when every criterion passes or fails only as a documented expected failure.

#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
    std::cout << "$ " << cmd << std::endl;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: acceptance <vardyn executable> <scratch dir>\n";
        return 2;
    }
    const fs::path cli = argv[1];
    const fs::path dir = fs::path(argv[2]) / "acceptance_run";
    fs::remove_all(dir);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> steps = {"synth", "calibrate", "extract", "nonlinear", "analytics"};
    for (const auto& s : steps) {
        if (const int code = run(quote(cli) + " " + s + " --out " + quote(dir)); code != 0) {
            std::cout << "pipeline step " << s << " exited with " << code << "\n";
            return 1;
        }
    }
    const int validate_code = run(quote(cli) + " validate --out " + quote(dir));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path report = dir / "validation.json";
    if (!fs::exists(report)) {
        std::cout << "no validation report at " << report << "\n";
        return 1;
    }
    std::ifstream f(report);
    const auto j = nlohmann::json::parse(f);
    std::map<int, nlohmann::json> by_id;
    for (const auto& c : j.at("criteria")) by_id[c.at("id").get<int>()] = c;

    int undocumented = 0;
    std::cout << "\n";
    for (int id = 1; id <= 14; ++id) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            std::cout << "criterion " << id << ": FAIL (not run)\n";
            ++undocumented;
            continue;
        }
        const auto& c = it->second;
        std::string status = c.at("status").get<std::string>();
        std::string detail = c.at("detail").get<std::string>();
        // the suite's own end-to-end check cannot see the exit code of validate or the full wall time
        if (id == 14 && status == "PASS" && (validate_code != 0 || wall >= 900.0)) {
            status = "FAIL";
            detail = "validate exit " + std::to_string(validate_code) + ", wall " + std::to_string(wall) + " s";
        }
        const bool pass = status == "PASS";
        const bool documented = status == "FAIL (documented)";
        if (!pass && !documented) ++undocumented;
        std::printf("criterion %2d %-28s: %s%s  [%s]\n", id, c.at("title").get<std::string>().c_str(), pass ? "PASS" : "FAIL",
                    documented ? " (documented expected failure)" : "", detail.c_str());
    }
    std::printf("pipeline wall time %.1f s\n", wall);
    return undocumented == 0 ? 0 : 1;
}
