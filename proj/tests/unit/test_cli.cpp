#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "intrakd/graph_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "intrakd_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(INTRAKD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path tiny_config() {
    fs::create_directories(kDir);
    const fs::path p = kDir / "tiny.conf";
    std::ofstream(p) << "data.train = 3\ndata.val = 1\ndata.test = 2\n"
                        "teacher.layers = 6:3:2,8:3:2\nteacher.taps = 0,1\nteacher.steps = 3\n"
                        "student.layers = 4:3:2,6:3:2\nstudent.taps = 0,1\nstudent.steps = 2\n"
                        "experiment.seeds = 1,2\noutput.graph_samples = 1\n";
    return p;
}

std::vector<std::string> csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    return rows;
}

}  // namespace

TEST(Cli, UsageErrors) {
    const fs::path conf = tiny_config();
    EXPECT_EQ(run("gen-data --out " + kDir.string()), 2);
    EXPECT_EQ(run("gen-data --config " + (kDir / "nope.conf").string()), 2);
    EXPECT_EQ(run("distill --config " + conf.string() + " --bogus"), 2);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("gen-data --config " + conf.string()), 2);  // no output directory
}

TEST(Cli, BadDataIsRuntimeError) {
    const fs::path conf = tiny_config();
    fs::create_directories(kDir / "broken");
    std::ofstream(kDir / "broken" / "manifest.json") << "{";
    EXPECT_EQ(run("eval --config " + conf.string() + " --out " + (kDir / "e0").string() + " --pred " +
                  (kDir / "broken").string() + " --gt " + (kDir / "broken").string()),
              1);
}

TEST(Cli, EvalPerfectCopy) {
    const fs::path conf = tiny_config();
    ASSERT_EQ(run("gen-data --config " + conf.string() + " --out " + (kDir / "data").string()), 0);
    ASSERT_EQ(run("eval --config " + conf.string() + " --out " + (kDir / "eval").string() + " --pred " +
                  (kDir / "data" / "test").string() + " --gt " + (kDir / "data" / "test").string()),
              0);
    const auto rows = csv_rows(kDir / "eval" / "metrics.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].substr(0, rows[1].find(',', rows[1].find(',') + 1) + 2), "eval,0,1");
}

TEST(Cli, TrainExportAndEvalCheckpoint) {
    const fs::path conf = tiny_config();
    const fs::path out = kDir / "teacher";
    ASSERT_EQ(run("train-teacher --config " + conf.string() + " --out " + out.string()), 0);
    ASSERT_TRUE(fs::exists(out / "teacher.ckpt"));
    ASSERT_EQ(run("export-graph --config " + conf.string() + " --out " + out.string() + " --checkpoint " +
                  (out / "teacher.ckpt").string() + " --sample 1 --tap 1"),
              0);
    const fs::path json = out / "graph_sample1_tap1.json";
    ASSERT_TRUE(fs::exists(json));
    std::ifstream in(json);
    const auto doc = nlohmann::json::parse(in);
    EXPECT_EQ(doc["format"], "intrakd-affinity-graph");
    EXPECT_EQ(doc["edges"].size(), 3u * 4u * 4u);
    EXPECT_NO_THROW(intrakd::load_graph_json(json));
    EXPECT_EQ(run("eval --config " + conf.string() + " --out " + out.string() + " --checkpoint " +
                  (out / "teacher.ckpt").string()),
              0);
    EXPECT_EQ(run("export-graph --config " + conf.string() + " --out " + out.string() + " --checkpoint " +
                  (out / "teacher.ckpt").string() + " --sample 9"),
              1);
}

TEST(Cli, DistillWithOverrides) {
    const fs::path conf = tiny_config();
    const fs::path out = kDir / "distill";
    ASSERT_EQ(run("distill --config " + conf.string() + " --out " + out.string() +
                  " --variant intra-kd --seed 4 --alpha1 0.05 --alpha2 0.15 --moments 1,3 --no-attention --kd-temp 2"),
              0);
    const auto rows = csv_rows(out / "metrics.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].rfind("intra-kd,4,", 0), 0u);
    std::ifstream in(out / "config.txt");
    std::stringstream text;
    text << in.rdbuf();
    EXPECT_NE(text.str().find("loss.moments = 1,3"), std::string::npos) << text.str();
    EXPECT_NE(text.str().find("loss.attention = false"), std::string::npos);
    EXPECT_NE(text.str().find("loss.alpha2 = 0.14999999999999999"), std::string::npos);
}

TEST(Cli, AblateGrid) {
    const fs::path conf = tiny_config();
    const fs::path out = kDir / "ablate";
    ASSERT_EQ(run("ablate --config " + conf.string() + " --out " + out.string()), 0);
    const auto rows = csv_rows(out / "metrics.csv");
    EXPECT_EQ(rows.size(), 1u + 7u * 2u);
}
